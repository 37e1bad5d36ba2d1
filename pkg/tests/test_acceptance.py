"""End-to-end acceptance checks for the step-size toolkit.

Each test covers one headline guarantee of the package, prints a single
``[PASS]``/``[FAIL] <name>`` line (visible under ``pytest -s``) and then
asserts.  Tolerances and target values are stated inline next to the checks.
"""

import math

import numpy as np

import festab as fs
from conftest import (fields_for_dim, jittered_mesh_2d, jittered_mesh_3d,
                      random_mesh_1d, suite_cases)

EPS_1D = 2.0 ** -4


def _verdict(name, ok, detail=""):
    tag = "PASS" if ok else "FAIL"
    line = f"[{tag}] {name}"
    if detail:
        line += f" -- {detail}"
    print(line)


def _report(mesh, field, mass_kind, include=(), **kw):
    return fs.stability_report(mesh, field, mass_kind=mass_kind,
                               include=include, **kw)


# ---------------------------------------------------------------------------
# 1. mass-matrix identities and diagonal/lumped two-sided comparisons
# ---------------------------------------------------------------------------

def test_mass_matrix_identities():
    rng = np.random.default_rng(2025)
    meshes = [random_mesh_1d(rng, int(rng.integers(8, 400)))
              for _ in range(10)]
    meshes += [jittered_mesh_2d(rng, int(rng.integers(3, 14)),
                                int(rng.integers(3, 14)), amount=0.2)
               for _ in range(10)]
    assert len(meshes) == 20
    assert max(m.num_elements for m in meshes) <= 1000

    slack = 1e-10
    bad = []
    for k, mesh in enumerate(meshes):
        d = mesh.dim
        dof = fs.DofMap(mesh)
        M = fs.assemble_mass(mesh, dof)

        # diagonal entries are 2 |patch_i| / ((d+1)(d+2))
        vols = mesh.volumes()
        patch = np.bincount(mesh.elements.ravel(),
                            weights=np.repeat(vols, d + 1),
                            minlength=mesh.nodes.shape[0])
        expect = 2.0 * patch[dof.free] / ((d + 1) * (d + 2))
        err = np.abs(M.diagonal() - expect) / expect
        if err.max() > 1e-12:
            bad.append(f"mesh {k}: diagonal identity off by {err.max():.2e}")

        # (1/2) diag(M) <= M <= ((d+2)/2) diag(M)  and
        # (1/(d+2)) M_lump <= M <= ((d+2)/2) M_lump   (PSD differences)
        Md = np.diag(M.diagonal())
        Ml = fs.assemble_lumped(mesh, dof).toarray()
        Mf = M.toarray()
        checks = [
            ("M - diag/2", Mf - 0.5 * Md),
            ("(d+2)/2 diag - M", 0.5 * (d + 2) * Md - Mf),
            ("M - lump/(d+2)", Mf - Ml / (d + 2)),
            ("(d+2)/2 lump - M", 0.5 * (d + 2) * Ml - Mf),
        ]
        for label, diff in checks:
            lo = float(np.linalg.eigvalsh(diff)[0])
            if lo < -slack:
                bad.append(f"mesh {k}: {label} has eigenvalue {lo:.3e}")

    _verdict("mass matrix identities", not bad,
             f"{len(meshes)} meshes, slack {slack:g}")
    assert not bad, "\n".join(bad)


# ---------------------------------------------------------------------------
# 2. stiffness diagonal bracketed by weighted patch eigenvalue sums
# ---------------------------------------------------------------------------

def test_stiffness_diagonal_patch_bracket():
    # the gradient constant and its reference-simplex origin
    assert abs(fs.c_grad(2) - math.sqrt(3.0) / 3.0) < 1e-15
    for d in (1, 2, 3):
        E = fs.reference_edge_matrix(d)
        grads = np.vstack([-np.ones(d), np.eye(d)]) @ np.linalg.inv(E)
        for g in grads:
            assert abs(g @ g - fs.c_grad(d)) <= 1e-14 * fs.c_grad(d)

    bad = []
    n_checked = 0
    for label, mesh, _ in suite_cases():
        d = mesh.dim
        fields = [fs.identity(d)]
        if d == 1:
            fields.append(fs.per1d(EPS_1D))
        elif d == 2:
            fields.append(fs.aniso2d(1000.0))
        dof = fs.DofMap(mesh)
        E = mesh.element_matrices()
        Fi = np.linalg.inv(E @ np.linalg.inv(fs.reference_edge_matrix(d)))
        vols = mesh.volumes()
        patches = fs.build_patches(mesh)
        for field in fields:
            A = fs.assemble_stiffness(mesh, field)
            Dk = fs.element_averages(field, mesh)
            S = Fi @ Dk @ np.swapaxes(Fi, 1, 2)
            ev = np.linalg.eigvalsh(0.5 * (S + np.swapaxes(S, 1, 2)))
            diag = A.diagonal()
            for loc, i in enumerate(dof.free):
                ks = patches.elements_of(i)
                lo = fs.c_grad(d) * float(vols[ks] @ ev[ks, 0])
                hi = fs.c_grad(d) * float(vols[ks] @ ev[ks, -1])
                n_checked += 1
                if not (lo - 1e-10 * hi <= diag[loc] <= hi * (1 + 1e-10)):
                    bad.append(f"{label}: node {i} diag {diag[loc]:.6g} "
                               f"outside [{lo:.6g}, {hi:.6g}]")

    _verdict("stiffness diagonal patch bracket", not bad,
             f"{n_checked} node checks")
    assert not bad, "\n".join(bad)


# ---------------------------------------------------------------------------
# 3. two-sided diagonal-ratio eigenvalue bracket across many cases
# ---------------------------------------------------------------------------

def test_eigenvalue_bracket_holds_across_cases():
    rng = np.random.default_rng(777)
    cases = []
    for label, mesh, paired in suite_cases():
        fields = fields_for_dim(mesh.dim)
        if paired is not None:
            fields = fields + [paired]
        cases.append((label, mesh, fields))
    for j in range(15):
        nx = int(rng.integers(3, 11))
        ny = int(rng.integers(3, 11))
        cases.append((f"rand2d-{j}", jittered_mesh_2d(rng, nx, ny),
                      fields_for_dim(2)))
    for j in range(15):
        cases.append((f"rand1d-{j}", random_mesh_1d(rng,
                                                    int(rng.integers(8, 200))),
                      fields_for_dim(1)))
    for j in range(5):
        cases.append((f"rand3d-{j}", jittered_mesh_3d(rng, n=2 + j % 2),
                      fields_for_dim(3)))

    bad = []
    n_cases = 0
    for label, mesh, fields in cases:
        for field in fields:
            for kind in fs.MASS_KINDS:
                rep = _report(mesh, field, kind)
                n_cases += 1
                if not (1.0 - 1e-9 <= rep.ratio <= rep.c_star * (1 + 1e-12)):
                    bad.append(f"{label}/{kind}: ratio {rep.ratio:.6f} "
                               f"outside [1, {rep.c_star:g}] "
                               f"(nonobtuse={rep.nonobtuse})")

    _verdict("eigenvalue bracket across cases", not bad,
             f"{n_cases} cases, zero violations required")
    assert n_cases >= 200
    assert not bad, "\n".join(bad)


# ---------------------------------------------------------------------------
# 4. 1D oscillatory/layered coefficient step tables
# ---------------------------------------------------------------------------

def test_oscillatory_1d_step_tables():
    sizes = (64, 128, 256, 512, 1024)
    violations = []
    for fam, builder in (("per1d", fs.per1d), ("nonper1d", fs.nonper1d)):
        field = builder(EPS_1D)
        weight = fs.adapted_weight(field)
        tau = {}
        ratio = {}
        for n in sizes:
            for mtype, mesh in (("uniform", fs.gen_uniform_1d(n)),
                                ("adapted",
                                 fs.gen_equidistributed_1d(n, weight))):
                for kind in ("full", "lumped"):
                    rep = _report(mesh, field, kind)
                    tau[(mtype, kind, n)] = rep.tau_max_over_s2
                    ratio[(mtype, kind, n)] = rep.ratio

        # every cell inside the observed ratio window [1.00, 1.45]
        for key, r in ratio.items():
            if not (1.0 - 1e-9 <= r <= 1.45):
                violations.append(f"{fam} {key}: ratio {r:.4f} "
                                  f"outside [1.00, 1.45]")

        # ratio -> 1 under refinement for all series except adapted+lumped:
        # decreasing over the last three sizes and final value <= 1.05
        for mtype, kind in (("uniform", "full"), ("uniform", "lumped"),
                            ("adapted", "full")):
            r3 = [ratio[(mtype, kind, n)] for n in sizes[-3:]]
            if not (r3[0] >= r3[1] >= r3[2] - 1e-12):
                violations.append(f"{fam} {mtype}/{kind}: ratios {r3} "
                                  f"not decreasing")
            if r3[-1] > 1.05:
                violations.append(f"{fam} {mtype}/{kind}: final ratio "
                                  f"{r3[-1]:.4f} > 1.05")

        # coefficient-adapted meshes allow 1.3x-1.9x larger steps
        for n in sizes:
            for kind in ("full", "lumped"):
                up = tau[("adapted", kind, n)] / tau[("uniform", kind, n)]
                if not (1.3 <= up <= 1.9):
                    violations.append(f"{fam} N={n} {kind}: adapted/uniform "
                                      f"step uplift {up:.4f} outside "
                                      f"[1.3, 1.9]")

        # lumping allows 2.5x-3.5x larger steps
        for n in sizes:
            for mtype in ("uniform", "adapted"):
                lf = tau[(mtype, "lumped", n)] / tau[(mtype, "full", n)]
                if not (2.5 <= lf <= 3.5):
                    violations.append(f"{fam} N={n} {mtype}: lumped/full "
                                      f"step ratio {lf:.4f} outside "
                                      f"[2.5, 3.5]")

    _verdict("1D step tables", not violations,
             f"{len(violations)} band violations")
    assert not violations, "\n".join(violations)


# ---------------------------------------------------------------------------
# 5. unit-square step tables: targets, reduction factor and bound bands
# ---------------------------------------------------------------------------

def test_square_grid_step_tables():
    # step-table targets follow the row-sum lumped mass convention;
    # geometric-bound bands are checked on the matching report rows
    field = fs.identity(2)
    target_iso, target_ani = 2.38e-4, 6.36e-6

    taus = {}
    for diagonal in ("right", "alternating"):
        iso = fs.gen_structured_2d(32, 32, diagonal=diagonal)
        ani = fs.gen_structured_2d(4, 256, diagonal=diagonal)
        taus[diagonal] = (
            _report(iso, field, "lumped_rowsum").tau_max_over_s2,
            _report(ani, field, "lumped_rowsum").tau_max_over_s2,
        )

    def hits(value, target):
        return abs(value / target - 1.0) <= 0.05

    ok_targets = [d for d, (t32, t4) in taus.items()
                  if hits(t32, target_iso) and hits(t4, target_ani)
                  and 35.0 <= t32 / t4 <= 39.0]

    bad = []
    if not ok_targets:
        bad.append(f"no diagonal pattern hits the step targets "
                   f"{target_iso:g}/{target_ani:g} (5%) with reduction "
                   f"37 +/- 2; measured {taus}")

    table = [
        ("32x32", fs.gen_structured_2d(32, 32, diagonal="right")),
        ("4x256", fs.gen_structured_2d(4, 256, diagonal="right")),
        ("bl-4x16", fs.gen_structured_2d(4, 16, grading="geometric",
                                         ratio_y=1.15)),
    ]
    for name, mesh in table:
        full = _report(mesh, field, "full", include=("zhudu",))
        lump = _report(mesh, field, "lumped_rowsum", include=("shewchuk",))
        rows_full = dict((m, r) for m, _, r in full.method_rows())
        rows_lump = dict((m, r) for m, _, r in lump.method_rows())
        checks = [
            (f"{name} lumped diag ratio", rows_lump["diag"], 1.14, 1.69),
            (f"{name} full diag ratio", rows_full["diag"], 1.18, 2.33),
            (f"{name} face-volume ratio", rows_full["zhudu"], 1.5, 4.0),
            (f"{name} patch-volume ratio", rows_lump["shewchuk"], 3.5, 7.5),
        ]
        for label, val, lo, hi in checks:
            if not (lo <= val <= hi):
                bad.append(f"{label} {val:.4f} outside [{lo}, {hi}]")

    _verdict("unit-square step tables", not bad,
             f"targets hit with diagonal(s) {ok_targets}")
    assert not bad, "\n".join(bad)


# ---------------------------------------------------------------------------
# 6. decay at the exact step limit, blow-up just beyond it
# ---------------------------------------------------------------------------

def test_contractivity_and_instability_onset():
    rng = np.random.default_rng(7)
    cells = [("1d-32", fs.gen_uniform_1d(32), fs.identity(1)),
             ("2d-8x8", fs.gen_structured_2d(8, 8, diagonal="alternating"),
              fs.identity(2))]
    bad = []
    for label, mesh, field in cells:
        d = mesh.dim
        dof = fs.DofMap(mesh)
        M = fs.assemble_mass(mesh, dof)
        A = fs.assemble_stiffness(mesh, field, 4, dof)
        for kind in fs.MASS_KINDS:
            Mt = {"full": M,
                  "lumped": fs.assemble_lumped(mesh, dof),
                  "lumped_rowsum": fs.row_sum_lumping(M)}[kind]
            lam = fs.lambda_max_exact(Mt, A).value
            U0 = rng.uniform(-1.0, 1.0, dof.n_free)
            for s in (1, 2, 5, 10):
                scheme = fs.ChebyshevScheme(s)
                tau = 2.0 * s * s / lam
                tr = fs.integrate(scheme, Mt, M, A, U0, tau, 200)
                tol = 1e-12 * max(tr.l2[0], tr.energy[0])
                if kind == "full":
                    viol = tr.nonincreasing(tol)
                    if viol is not None:
                        bad.append(f"{label}/{kind}/s={s}: {viol[0]} norm "
                                   f"grew at step {viol[1]}")
                else:
                    if (np.diff(tr.energy) > tol).any():
                        bad.append(f"{label}/{kind}/s={s}: energy norm grew")
                    cap = (d + 2) / math.sqrt(2.0)
                    if tr.l2[-1] > cap * tr.l2[0]:
                        bad.append(f"{label}/{kind}/s={s}: final L2 "
                                   f"{tr.l2[-1]:.4g} above "
                                   f"{cap:.4g} x initial")

                # 2% past the limit, seeded near the extreme mode: the
                # energy must exceed 10x its start within the step count
                # predicted by the stability polynomial, plus 5
                _, vec = fs.max_eigvec_exact(Mt, A)
                U0i = vec + 1e-8 * rng.uniform(-1.0, 1.0, dof.n_free)
                tau_i = 1.02 * tau
                g = abs(float(fs.stability_poly_eval(scheme, -tau_i * lam)))
                pred = math.ceil(math.log(10.0) / math.log(g))
                tri = fs.integrate(scheme, Mt, M, A, U0i, tau_i, pred + 5)
                hit = np.flatnonzero(tri.energy > 10.0 * tri.energy[0])
                if hit.size == 0:
                    bad.append(f"{label}/{kind}/s={s}: no 10x energy growth "
                               f"within {pred + 5} steps at 1.02x the limit")

    _verdict("contractivity and instability onset", not bad,
             "24 cells x stable/unstable runs")
    assert not bad, "\n".join(bad)


# ---------------------------------------------------------------------------
# 7. five-step Krylov estimate with 1.1 security stays within 15%
# ---------------------------------------------------------------------------

def test_lanczos_step_estimates_within_band():
    gw_mesh, gw_field = fs.gen_groundwater_like()
    cases = [
        ("32x32", fs.gen_structured_2d(32, 32, diagonal="right"),
         fs.identity(2)),
        ("4x256", fs.gen_structured_2d(4, 256, diagonal="right"),
         fs.identity(2)),
        ("bl-4x16", fs.gen_structured_2d(4, 16, grading="geometric",
                                         ratio_y=1.15), fs.identity(2)),
        ("groundwater", gw_mesh, gw_field),
    ]
    bad = []
    ratios = []
    for label, mesh, field in cases:
        dof = fs.DofMap(mesh)
        M = fs.assemble_mass(mesh, dof)
        A = fs.assemble_stiffness(mesh, field, 4, dof)
        for kind in ("full", "lumped_rowsum"):
            Mt = M if kind == "full" else fs.row_sum_lumping(M)
            exact = fs.lambda_max_exact(Mt, A).value
            est = fs.lambda_max_lanczos(Mt, A, steps=5, seed=2,
                                        security=1.1)
            # tau_max / tau_h for the Krylov step bound 2 s^2 / estimate
            r = est.value / exact
            ratios.append(r)
            if not (1.0 <= r <= 1.15):
                bad.append(f"{label}/{kind}: ratio {r:.4f} outside "
                           f"[1.00, 1.15]")

    _verdict("Krylov step estimates", not bad,
             f"ratios in [{min(ratios):.4f}, {max(ratios):.4f}]")
    assert not bad, "\n".join(bad)


# ---------------------------------------------------------------------------
# 8. aligned strong anisotropy separates the bound families
# ---------------------------------------------------------------------------

def test_aligned_anisotropy_bound_separation():
    mesh = fs.gen_metric_aligned(kappa=1000.0)
    field = fs.aniso2d(1000.0)
    rep = _report(mesh, field, "full", include=("geo", "zhudu"))
    rows = dict((m, r) for m, _, r in rep.method_rows())

    bad = []
    if rows["zhudu"] < 100.0:
        bad.append(f"face-volume bound ratio {rows['zhudu']:.1f} < 100")
    if rows["geo"] > 10.0:
        bad.append(f"geometric bound ratio {rows['geo']:.2f} > 10")
    if not (1.0 - 1e-9 <= rows["diag"] <= rep.c_star):
        bad.append(f"diagonal-ratio bound ratio {rows['diag']:.2f} outside "
                   f"[1, {rep.c_star:g}]")

    _verdict("aligned anisotropy separation", not bad,
             f"ratios diag {rows['diag']:.2f} / geo {rows['geo']:.2f} / "
             f"face-volume {rows['zhudu']:.1f}")
    assert not bad, "\n".join(bad)


# ---------------------------------------------------------------------------
# 9. quality-measure identities and the inscribed-diameter inequality
# ---------------------------------------------------------------------------

def test_quality_measure_identities():
    bad = []
    for label, mesh, paired in suite_cases():
        d = mesh.dim
        fields = fields_for_dim(d)
        if paired is not None:
            fields = fields + [paired]
        for field in fields:
            q = fs.mesh_quality_summary(mesh, fs.InverseOf(field))
            mean_inv = float(np.mean(1.0 / q.q_eq))
            if abs(mean_inv - 1.0) > 1e-10:
                bad.append(f"{label}: mean 1/q_eq = {mean_inv!r}")
            if (q.q_ali < 1.0 - 1e-12).any():
                bad.append(f"{label}: q_ali below 1")
            combined = q.q_ali * q.q_eq ** (2.0 / d)
            err = np.abs(q.q_m - combined) / combined
            if err.max() > 1e-10:
                bad.append(f"{label}: q_m composition off by {err.max():.2e}")

    rng = np.random.default_rng(99)
    hhat2 = fs.reference_diameter(2) ** 2
    n_done = 0
    while n_done < 1000:
        nodes = rng.uniform(0.0, 1.0, (3, 2))
        if abs(np.linalg.det(nodes[1:] - nodes[0])) < 1e-3:
            continue
        mesh = fs.SimplicialMesh(nodes, np.array([[0, 1, 2]]),
                                 np.array([1, 2, 2]))
        B = rng.uniform(-1.0, 1.0, (2, 2))
        metric_mat = B @ B.T + 0.05 * np.eye(2)
        q = fs.mesh_quality_summary(mesh, fs.Constant(metric_mat))
        rho = fs.inscribed_diameter_metric(mesh, 0, metric_mat)
        h_elem = q.element(0).h_elem
        if q.q_ali[0] > hhat2 * (h_elem / rho) ** 2 * (1.0 + 1e-10):
            bad.append(f"triangle {n_done}: q_ali {q.q_ali[0]:.6g} above "
                       f"inscribed-diameter limit")
        n_done += 1

    _verdict("quality measure identities", not bad,
             f"{n_done} random triangles")
    assert not bad, "\n".join(bad)
