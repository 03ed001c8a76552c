"""RMSE of scrambled Sobol', rotated lattice and plain MC on a smooth product."""

from rqmc.estimate import ExperimentConfig, convergence_study, rmse_slope

base = dict(integrand="smooth-product", d=2, params={"c": 1.0}, m_min=4, m_max=12, replicates=300, seed=3)

reports = {
    kind: convergence_study(ExperimentConfig(sampler=kind, **base))
    for kind in ("scrambled-net", "lattice-cp", "plain-mc")
}

print(f"{'n':>6}" + "".join(f"{k:>16}" for k in reports))
for i, row in enumerate(reports["plain-mc"].rows):
    print(f"{row.n:>6d}" + "".join(f"{r.rows[i].rmse:>16.3e}" for r in reports.values()))

print("\nlog-log RMSE slopes, m = 4..12")
for kind, rep in reports.items():
    fit = rmse_slope(rep, 4, 12)
    print(f"  {kind:<14}{fit.slope:7.3f} +- {fit.stderr:.3f}")

# Scrambled nets approach n^-1.5 on smooth integrands, MC stays at n^-0.5.
# Korobov lattices with a fixed multiplier are not tuned for each n here.
