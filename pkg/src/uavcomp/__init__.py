"""Coverage, rate and swarm control for CoMP-enabled UAV networks.

Modules: ``specialfn`` (Γ, ₁F₁, parabolic cylinder functions, quadrature),
``geometry`` (marked PPP deployments, CoMP sets, Delaunay cells),
``channel`` (Nakagami fading and SIR), ``analytic`` (Gamma approximations,
coverage and rate), ``formation`` and ``tracking`` (swarm control),
``montecarlo`` (simulation harness) and ``cli``.
"""

__version__ = "0.1.0"
