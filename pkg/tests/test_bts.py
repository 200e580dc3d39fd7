import numpy as np
import pytest

from plumebench import BtsProblem, bts_objective, solve_bts


def random_problem(rng, n_clean=4, n_cont=3, bands=5, sign_mode="emission"):
    clean = rng.uniform(1.0, 5.0, (n_clean, bands))
    contaminated = rng.uniform(1.0, 5.0, (n_cont, bands))
    return BtsProblem(clean, contaminated, sign_mode=sign_mode)


def random_point(rng, problem):
    m, b = problem.n_contaminated, problem.band_count
    l_off = rng.uniform(0.0, 6.0, b)
    psi = rng.uniform(0.0, 2.0, (m, b))
    if problem.sign_mode == "absorption":
        psi = -psi
    t = rng.uniform(0.0, 1.0, b)
    return l_off, psi, t


# ---------------------------------------------------------------------------
# objective

def test_zero_psi_reduces_to_two_mse_terms(rng):
    problem = random_problem(rng)
    l_off = rng.uniform(1.0, 4.0, problem.band_count)
    psi = np.zeros((problem.n_contaminated, problem.band_count))
    t = rng.uniform(0.0, 1.0, problem.band_count)
    value, (_, _, d_t) = bts_objective(l_off, psi, t, problem)
    expected = (((problem.clean - l_off) ** 2).sum() / len(problem.clean)
                + ((problem.contaminated - l_off) ** 2).sum() / problem.n_contaminated)
    assert value == pytest.approx(expected, rel=1e-12)
    assert np.allclose(d_t, 0.0)


def test_exact_fit_reaches_zero(rng):
    b = 4
    l_off = rng.uniform(1.0, 3.0, b)
    t = rng.uniform(0.0, 1.0, b)
    psi = rng.uniform(0.0, 2.0, (2, b))
    problem = BtsProblem(np.tile(l_off, (3, 1)), l_off + psi * t)
    value, _ = bts_objective(l_off, psi, t, problem)
    assert value == pytest.approx(0.0, abs=1e-14)


def finite_difference_grads(l_off, psi, t, problem, step=1e-6):
    def value_at(lo, ps, tt):
        return bts_objective(lo, ps, tt, problem)[0]

    g_l = np.zeros_like(l_off)
    for j in range(l_off.size):
        up, dn = l_off.copy(), l_off.copy()
        up[j] += step
        dn[j] -= step
        g_l[j] = (value_at(up, psi, t) - value_at(dn, psi, t)) / (2 * step)
    g_p = np.zeros_like(psi)
    for i in range(psi.shape[0]):
        for j in range(psi.shape[1]):
            up, dn = psi.copy(), psi.copy()
            up[i, j] += step
            dn[i, j] -= step
            g_p[i, j] = (value_at(l_off, up, t) - value_at(l_off, dn, t)) / (2 * step)
    g_t = np.zeros_like(t)
    for j in range(t.size):
        up, dn = t.copy(), t.copy()
        up[j] += step
        dn[j] -= step
        g_t[j] = (value_at(l_off, psi, up) - value_at(l_off, psi, dn)) / (2 * step)
    return g_l, g_p, g_t


@pytest.mark.parametrize("seed", range(50))
def test_gradients_match_central_differences(seed):
    rng = np.random.default_rng(seed)
    sign_mode = "emission" if seed % 2 == 0 else "absorption"
    problem = random_problem(rng, n_clean=3, n_cont=2, bands=4, sign_mode=sign_mode)
    l_off, psi, t = random_point(rng, problem)
    _, analytic = bts_objective(l_off, psi, t, problem)
    numeric = finite_difference_grads(l_off, psi, t, problem)
    for a, n in zip(analytic, numeric):
        scale = max(np.linalg.norm(n), 1e-12)
        assert np.linalg.norm(a - n) / scale < 1e-5


# ---------------------------------------------------------------------------
# solver

def test_empty_contaminated_set_gives_mean(rng):
    clean = rng.uniform(1.0, 5.0, (6, 3))
    problem = BtsProblem(clean, np.empty((0, 3)))
    solution = solve_bts(problem)
    mean = clean.mean(axis=0)
    assert np.allclose(solution.l_off, mean, atol=1e-6)
    variance_term = ((clean - mean) ** 2).sum() / 6
    assert solution.objective == pytest.approx(variance_term, rel=1e-8)


def test_planted_two_band_instance():
    problem = BtsProblem(clean=np.array([[4.0, 4.0]]),
                         contaminated=np.array([[6.0, 5.0]]),
                         sign_mode="emission")
    solution = solve_bts(problem)
    assert solution.objective <= 1e-6
    assert np.all(solution.psi >= 0)
    assert np.all((solution.t >= 0) & (solution.t <= 1))


def test_planted_multi_pixel_instance(rng):
    b = 6
    l_off = rng.uniform(2.0, 4.0, b)
    t = rng.uniform(0.1, 1.0, b)
    t /= t.max()
    coeffs = rng.uniform(0.5, 2.0, (4, 1))
    clean = np.tile(l_off, (5, 1))
    contaminated = l_off + coeffs * t
    problem = BtsProblem(clean, contaminated, sign_mode="emission")
    solution = solve_bts(problem)
    assert solution.objective <= 1e-6
    assert np.allclose(solution.l_off, l_off, atol=1e-3)


def test_tiny_instance_beats_lattice_oracle():
    problem = BtsProblem(clean=np.array([[1.0, 2.0]]),
                         contaminated=np.array([[1.8, 2.3]]),
                         sign_mode="emission")
    solution = solve_bts(problem)

    # oracle: lattice over (psi, t) with the exact closed-form optimal L_off;
    # the closed form can only improve on a lattice of L_off values
    step = 0.05
    psis = np.arange(0.0, 2.0 + step, step)
    ts = np.arange(0.0, 1.0 + step, step)
    p1, p2, t1, t2 = np.meshgrid(psis, psis, ts, ts, indexing="ij")
    adj1 = problem.contaminated[0, 0] - p1 * t1
    adj2 = problem.contaminated[0, 1] - p2 * t2
    l1 = (problem.clean[0, 0] + adj1) / 2
    l2 = (problem.clean[0, 1] + adj2) / 2
    objective = ((problem.clean[0, 0] - l1) ** 2 + (problem.clean[0, 1] - l2) ** 2
                 + (adj1 - l1) ** 2 + (adj2 - l2) ** 2)
    oracle = float(objective.min())
    assert solution.objective <= oracle + 1e-3


def test_solution_feasible_exactly(rng):
    for sign_mode in ("emission", "absorption"):
        problem = random_problem(rng, sign_mode=sign_mode)
        solution = solve_bts(problem)
        if sign_mode == "emission":
            assert np.all(solution.psi >= 0)
        else:
            assert np.all(solution.psi <= 0)
        assert np.all((solution.t >= 0) & (solution.t <= 1))


def test_objective_non_increasing_along_trace(rng):
    problem = random_problem(rng, n_clean=6, n_cont=4, bands=6)
    solution = solve_bts(problem, record_trace=True)
    trace = np.asarray(solution.trace)
    assert trace.size >= 1
    slack = 1e-12 * np.maximum(1.0, np.abs(trace[:-1]))
    assert np.all(np.diff(trace) <= slack)


def test_never_worse_than_initialization(rng):
    from plumebench.bts import _initialize

    problem = random_problem(rng, n_clean=5, n_cont=3, bands=5)
    l_off0, psi0, t0 = _initialize(problem, seed=0)
    init_value, _ = bts_objective(l_off0, psi0, t0, problem)
    solution = solve_bts(problem)
    assert solution.objective <= init_value + 1e-12


def test_absorption_mirrors_emission(rng):
    clean = rng.uniform(2.0, 4.0, (4, 5))
    contaminated = rng.uniform(2.0, 4.0, (3, 5))
    emission = BtsProblem(clean, contaminated, sign_mode="emission")
    mirrored = BtsProblem(clean, 2 * clean.mean(axis=0) - contaminated,
                          sign_mode="absorption")
    sol_e = solve_bts(emission)
    sol_a = solve_bts(mirrored)
    assert sol_a.objective == pytest.approx(sol_e.objective, abs=1e-8)


def test_trace_csv(tmp_path, rng):
    problem = random_problem(rng)
    solution = solve_bts(problem, record_trace=True)
    path = tmp_path / "trace.csv"
    solution.write_trace_csv(path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "iteration,objective"
    assert len(lines) == len(solution.trace) + 1


def test_problem_validation():
    with pytest.raises(ValueError, match="clean"):
        BtsProblem(np.empty((0, 3)), np.ones((2, 3)))
    with pytest.raises(ValueError, match="band"):
        BtsProblem(np.ones((2, 3)), np.ones((2, 4)))
    with pytest.raises(ValueError, match="sign_mode"):
        BtsProblem(np.ones((2, 3)), np.ones((2, 3)), sign_mode="sideways")
