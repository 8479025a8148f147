import numpy as np
import pytest

from gnevolt import load_bundled
from gnevolt.errors import DomainError
from gnevolt.solvers import AdmmConfig, GapProbeSet, ergodic_gap, run_admm, theorem2_parameters


def test_single_area_limits(chain2):
    rep = theorem2_parameters(chain2.decomp, chain2.model)
    assert rep.rho_max == pytest.approx(1.0, rel=1e-12)
    assert rep.beta_factor == pytest.approx(((3 + np.sqrt(5)) / 2) ** 2, rel=1e-12)
    assert rep.rho == rep.rho_max and rep.beta == pytest.approx(rep.rho * rep.beta_factor)
    assert rep.admissible


@pytest.mark.parametrize("name", ["chain2", "chain2_split", "tree8", "radial12", "ieee13"])
def test_proof_matrices(name):
    sc = load_bundled(name)
    rep = theorem2_parameters(sc.decomp, sc.model)
    n = sc.N
    assert rep.H.shape == (3 * n, 3 * n)
    assert np.array_equal(rep.Q, rep.H @ rep.M)
    scale = np.abs(rep.H).max()
    assert rep.lam_min_H >= -1e-12 * scale
    assert rep.lam_min_R >= -1e-12 * max(scale, np.abs(rep.R).max())
    np.testing.assert_array_equal(rep.R, 2 * rep.H @ rep.M - rep.M.T @ rep.H @ rep.M)


def test_inadmissible_flagged(chain2):
    rep = theorem2_parameters(chain2.decomp, chain2.model, rho=2.0, beta=1.0)
    assert not rep.admissible
    assert rep.lam_min_H < 0


def test_rejects_nonpositive(chain2):
    with pytest.raises(DomainError):
        theorem2_parameters(chain2.decomp, chain2.model, rho=-1.0)


def test_probes_stay_in_box(chain2):
    probes = GapProbeSet.random(20, chain2.limits, seed=3)
    probes.validate(chain2.limits)
    bad = GapProbeSet((np.full(6, 5.0),))
    with pytest.raises(DomainError):
        bad.validate(chain2.limits)


def test_ergodic_gap_nonnegative(chain2):
    rep = theorem2_parameters(chain2.decomp, chain2.model)
    cfg = AdmmConfig(rho=rep.rho, beta=rep.beta, stop="none", max_iter=400, track_ergodic=True)
    tr = run_admm(chain2, cfg)
    probes = GapProbeSet.random(100, chain2.limits, center=tr.omega0, scale=0.5, seed=1)
    gap = ergodic_gap(tr, probes, tr.omega0, rep.H, rho=rep.rho, model=chain2.model,
                      costs=chain2.costs, decomp=chain2.decomp)
    assert gap.shape == (400, 100)
    assert gap.min() >= -1e-9


def test_ergodic_gap_requires_data(chain2):
    tr = run_admm(chain2, AdmmConfig(rho=1.0, beta=7.0, max_iter=5, stop="none"))
    with pytest.raises(DomainError):
        ergodic_gap(tr, GapProbeSet.random(1, chain2.limits), tr.omega0, np.eye(6),
                    rho=1.0, model=chain2.model, costs=chain2.costs, decomp=chain2.decomp)


def test_margin_nonnegative_at_equilibrium_probe(chain2):
    rep = theorem2_parameters(chain2.decomp, chain2.model)
    star = run_admm(chain2, AdmmConfig(rho=rep.rho, beta=rep.beta, tol=1e-14, theta_tol=1e-14))
    assert star.converged
    omega_star = np.concatenate([star.v, star.q, star.theta])
    cfg = AdmmConfig(rho=rep.rho, beta=rep.beta, stop="none", max_iter=300, track_ergodic=True)
    tr = run_admm(chain2, cfg)
    gap = ergodic_gap(tr, GapProbeSet((omega_star,)), tr.omega0, rep.H, rho=rep.rho,
                      model=chain2.model, costs=chain2.costs, decomp=chain2.decomp)
    assert gap.min() >= -1e-9


def test_bound_side_decays_as_inverse_t(chain2):
    rep = theorem2_parameters(chain2.decomp, chain2.model)
    cfg = AdmmConfig(rho=rep.rho, beta=rep.beta, stop="none", max_iter=50, track_ergodic=True)
    tr = run_admm(chain2, cfg)
    p = tr.omega0 + 0.3
    # with F-term removed, margin * 2(t+1) is constant
    zero = GapProbeSet((p,))
    gap = ergodic_gap(tr, zero, tr.omega0, rep.H, rho=rep.rho, model=chain2.model,
                      costs=chain2.costs, decomp=chain2.decomp)[:, 0]
    from gnevolt.game import f_mapping
    F = f_mapping(p, rep.rho, chain2.model, chain2.costs, chain2.decomp)
    lhs = np.array([(a - p) @ F for _, a in tr.ergodic])
    rhs = (gap + lhs) * 2 * (np.arange(50) + 1)
    np.testing.assert_allclose(rhs, rhs[0], rtol=1e-12)
