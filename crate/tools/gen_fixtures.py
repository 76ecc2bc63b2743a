#!/usr/bin/env python3
"""Regenerate the frozen numeric fixtures under crates/core/tests/fixtures/.

Independent reference implementation (NumPy/SciPy/mpmath) of the generator
assembly, Bures distance, matrix exponential, and Wigner sampling that the
Rust crate implements. Conventions pinned here and in the crate:

  * tensor factors ordered (system, ancilla); np.kron(sys, anc)
  * column-stacking vectorization: vec(A rho B) = kron(B.T, A) vec(rho)
  * quadratures X1 = a + a^dag, X2 = -i(a - a^dag)
  * Wigner normalized so that the X1-X2 plane integral is 1

Run from the repo root: python3 tools/gen_fixtures.py
"""

import os

import numpy as np
from scipy.linalg import expm

OUT = os.path.join(os.path.dirname(__file__), "..", "crates", "core", "tests", "fixtures")


def write_complex_matrix(path, m, meta=""):
    m = np.asarray(m, dtype=complex)
    with open(path, "w") as fh:
        if meta:
            for line in meta.strip().splitlines():
                fh.write("# " + line.strip() + "\n")
        fh.write(f"{m.shape[0]} {m.shape[1]}\n")
        for i in range(m.shape[0]):
            for j in range(m.shape[1]):
                v = m[i, j]
                if v != 0.0:
                    fh.write(f"{i} {j} {float(v.real)!r} {float(v.imag)!r}\n")


def annihilation(d):
    a = np.zeros((d, d), dtype=complex)
    for n in range(1, d):
        a[n - 1, n] = np.sqrt(n)
    return a


def eye(d):
    return np.eye(d, dtype=complex)


def h_parametric(d, lam):
    a = annihilation(d)
    return -0.25j * lam * (a @ a - a.conj().T @ a.conj().T)


def sup_c(h, d):
    return -1j * (np.kron(eye(d), h) - np.kron(h.T, eye(d)))


def sup_j(c, d):
    return np.kron(c.conj(), c)


def sup_a(c, d):
    cc = c.conj().T @ c
    return 0.5 * (np.kron(eye(d), cc) + np.kron(cc.T, eye(d)))


def sup_d(c, d):
    return sup_j(c, d) - sup_a(c, d)


def multiplier_superop(z_diag, c, d, mult):
    """sum_ab mult(z_a, z_b) |a><a| . J-style sandwich . |b><b| for diagonal Z."""
    j = sup_j(c, d)
    scale = np.zeros(d * d, dtype=complex)
    for b in range(d):
        for a_ in range(d):
            scale[a_ + d * b] = mult(z_diag[a_], z_diag[b])
    return scale[:, None] * j


SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=complex)  # ground state = index 0


def main():
    os.makedirs(OUT, exist_ok=True)

    d = 4
    lam, chi = 0.3, 0.7
    a = annihilation(d)
    n_diag = np.arange(d, dtype=float)
    hs = h_parametric(d, lam)
    base = sup_c(hs, d)

    # no feedback
    write_complex_matrix(
        os.path.join(OUT, "gen_no_feedback.txt"),
        base + sup_d(a, d),
        f"no-feedback generator, dim {d}, lambda {lam}",
    )

    # simple feedback: D[exp(-i chi n) a]
    u = np.diag(np.exp(-1j * chi * n_diag))
    write_complex_matrix(
        os.path.join(OUT, "gen_simple.txt"),
        base + sup_d(u @ a, d),
        f"simple-feedback generator, dim {d}, lambda {lam}, chi {chi}",
    )

    # eo-TLA adiabatic, closed form: C[H] + D[a] + mult(-i dz/(1+i dz)) J[a]
    z = chi * n_diag
    eo_tla = base + sup_d(a, d) + multiplier_superop(
        z, a, d, lambda za, zb: -1j * (za - zb) / (1 + 1j * (za - zb))
    )
    write_complex_matrix(
        os.path.join(OUT, "gen_eo_tla_adiabatic.txt"),
        eo_tla,
        f"eo-TLA adiabatic generator, dim {d}, lambda {lam}, chi {chi}",
    )

    # eo-mode adiabatic: C[H] + D[u a] + diff * D[Z]
    diff = 0.004
    write_complex_matrix(
        os.path.join(OUT, "gen_eo_mode_adiabatic.txt"),
        base + sup_d(u @ a, d) + diff * sup_d(np.diag(z.astype(complex)), d),
        f"eo-mode adiabatic generator, dim {d}, lambda {lam}, chi {chi}, gamma/eps^2 {diff}",
    )

    # all-optical adiabatic, rational form: C[H] + D[a] + C[Z] J[(1+iZ/2)^-1 a]
    ao = base + sup_d(a, d) + multiplier_superop(
        z, a, d,
        lambda za, zb: -1j * (za - zb) / ((1 + 0.5j * za) * (1 - 0.5j * zb)),
    )
    write_complex_matrix(
        os.path.join(OUT, "gen_ao_adiabatic.txt"),
        ao,
        f"all-optical adiabatic generator, dim {d}, lambda {lam}, chi {chi}",
    )

    # Kerr: C[H + (chi/2) adag^2 a^2] + D[a]
    hk = hs + 0.5 * chi * (a.conj().T @ a.conj().T @ a @ a)
    write_complex_matrix(
        os.path.join(OUT, "gen_kerr.txt"),
        sup_c(hk, d) + sup_d(a, d),
        f"Kerr generator, dim {d}, lambda {lam}, chi {chi}",
    )

    # eo-TLA compound on 3 (x) 2: -i[Hs + g n sig+sig- + delta sig+sig-, .]
    #                              + D[(exp(-i pi/2 sigx)) a] + Gam D[sig-]
    ds, g, gam, delta = 3, 1.1, 2.3, 0.4
    dc = ds * 2
    asys = np.kron(annihilation(ds), eye(2))
    nsys = asys.conj().T @ asys
    sig = np.kron(eye(ds), SIGMA_MINUS)
    pe = sig.conj().T @ sig
    hsc = np.kron(h_parametric(ds, lam), eye(2)) + g * (nsys @ pe) + delta * pe
    ufb = np.kron(eye(ds), expm(-0.5j * np.pi * SIGMA_X))
    eo_comp = sup_c(hsc, dc) + sup_d(ufb @ asys, dc) + gam * sup_d(sig, dc)
    write_complex_matrix(
        os.path.join(OUT, "gen_eo_tla_compound.txt"),
        eo_comp,
        f"eo-TLA compound generator, dims 3x2, lambda {lam}, g {g}, gamma {gam}, delta {delta}",
    )

    # all-optical compound (TLA ancilla) on 3 (x) 2:
    # -i[Hs + g n pe, .] + D[a] + Gam D[sig] + sqrt(Gam)([a.,sig+]+[sig,.adag])
    hao = np.kron(h_parametric(ds, lam), eye(2)) + g * (nsys @ pe)
    casc = np.zeros((dc * dc, dc * dc), dtype=complex)
    # W -> sqrt(Gam) ( a W sig+ - sig+ a W + sig W adag - W adag sig )
    sg = np.sqrt(gam)
    casc += sg * np.kron((sig.conj().T).T, asys)           # a W sig+
    casc -= sg * np.kron(eye(dc), sig.conj().T @ asys)      # sig+ a W
    casc += sg * np.kron(asys.conj(), sig)                  # sig W adag
    casc -= sg * np.kron((asys.conj().T @ sig).T, eye(dc))  # W adag sig
    ao_comp = sup_c(hao, dc) + sup_d(asys, dc) + gam * sup_d(sig, dc) + casc
    write_complex_matrix(
        os.path.join(OUT, "gen_ao_tla_compound.txt"),
        ao_comp,
        f"all-optical TLA compound generator, dims 3x2, lambda {lam}, g {g}, gamma {gam}",
    )

    # all-optical compound with mode ancilla on 3 (x) 3
    da = 3
    dm = ds * da
    b = np.kron(eye(ds), annihilation(da))
    am = np.kron(annihilation(ds), eye(da))
    nm = am.conj().T @ am
    hmo = np.kron(h_parametric(ds, lam), eye(da)) + g * (nm @ (b.conj().T @ b))
    cascm = (
        sg * np.kron((b.conj().T).T, am)
        - sg * np.kron(eye(dm), b.conj().T @ am)
        + sg * np.kron(am.conj(), b)
        - sg * np.kron((am.conj().T @ b).T, eye(dm))
    )
    ao_mode = sup_c(hmo, dm) + sup_d(am, dm) + gam * sup_d(b, dm) + cascm
    write_complex_matrix(
        os.path.join(OUT, "gen_ao_mode_compound.txt"),
        ao_mode,
        f"all-optical mode compound generator, dims 3x3, lambda {lam}, g {g}, gamma {gam}",
    )

    # Jaynes-Cummings compound, interaction picture, on 3 (x) 2:
    # C[Hs + (g^2/del) n + Del pe + g(a sig+ + sig adag)] + Gam D[sig] + D[U a]
    delta_jc = 3.7
    big = delta_jc + g * g / delta_jc
    hjc = (
        np.kron(h_parametric(ds, lam), eye(2))
        + (g * g / delta_jc) * nsys
        + big * pe
        + g * (asys @ sig.conj().T + sig @ asys.conj().T)
    )
    jc = sup_c(hjc, dc) + gam * sup_d(sig, dc) + sup_d(ufb @ asys, dc)
    write_complex_matrix(
        os.path.join(OUT, "gen_jc_compound.txt"),
        jc,
        f"JC compound generator, dims 3x2, lambda {lam}, g {g}, gamma {gam}, delta {delta_jc}",
    )

    # JC adiabatic on dim 4: eo-TLA-adiabatic multiplier with Z_eff plus extras
    zc = 2 * g * g / (gam * big)
    zeff = zc * n_diag
    a2 = a @ a
    jc_ad = (
        base
        + sup_d(a, d)
        + multiplier_superop(zeff, a, d, lambda za, zb: -1j * (za - zb) / (1 + 1j * (za - zb)))
        + (gam * g * g / big**2) * sup_d(a, d)
        + sup_c((g**4 / big**3) * (a2.conj().T @ a2), d)
    )
    write_complex_matrix(
        os.path.join(OUT, "gen_jc_adiabatic.txt"),
        jc_ad,
        f"JC adiabatic generator, dim {d}, lambda {lam}, g {g}, gamma {gam}, delta {delta_jc}",
    )

    # static transformed eo-mode compound at eps = 0 on 3 (x) 3:
    # -i[g n (b + bdag) + Hs, .] + D[a] + Gam D[b]
    htr = np.kron(h_parametric(ds, lam), eye(da)) + g * (nm @ (b + b.conj().T))
    write_complex_matrix(
        os.path.join(OUT, "gen_eo_mode_static.txt"),
        sup_c(htr, dm) + sup_d(am, dm) + gam * sup_d(b, dm),
        f"transformed eo-mode compound at eps 0, dims 3x3, lambda {lam}, g {g}, gamma {gam}",
    )

    # ---- deterministic test states (shared with the Rust side by formula) ----
    def det_state(dim, salt):
        m = np.zeros((dim, dim), dtype=complex)
        for i in range(dim):
            for j in range(dim):
                m[i, j] = complex(np.sin(1.0 + salt + 3.0 * i + j), np.cos(2.0 * salt + i - 2.0 * j))
        rho = m @ m.conj().T
        return rho / np.trace(rho).real

    # Bures distance, printed convention sqrt(2)*(1 - tr sqrt(sqrt(r1) r2 sqrt(r1)))
    from mpmath import mp, mpc, matrix, eigh as mp_eigh

    mp.dps = 60

    def mp_matrix(x):
        dim = x.shape[0]
        m = matrix(dim, dim)
        for i in range(dim):
            for j in range(dim):
                m[i, j] = mpc(x[i, j].real, x[i, j].imag)
        return m

    def mp_sqrtm_herm(m):
        ev, q = mp_eigh(m)
        dim = m.rows
        root = matrix(dim, dim)
        for k in range(dim):
            root[k, k] = mp.sqrt(ev[k])
        return q * root * q.H

    r1, r2 = det_state(6, 0.0), det_state(6, 5.0)
    m1, m2 = mp_matrix(r1), mp_matrix(r2)
    s1 = mp_sqrtm_herm(m1)
    half = s1 * m2 * s1
    inner = mp_sqrtm_herm((half + half.H) / 2)
    tracev = sum(inner[k, k] for k in range(6))
    bures = mp.sqrt(2) * (1 - tracev.real)
    with open(os.path.join(OUT, "bures_pair.txt"), "w") as fh:
        fh.write("# bures distance between det_state(6,0) and det_state(6,5), 60-digit reference\n")
        fh.write(f"{float(bures)!r}\n")
        fh.write(f"{float(tracev.real)!r}\n")

    # dense matrix exponential of a deterministic non-normal 6x6
    def det_mat(dim, salt):
        m = np.zeros((dim, dim), dtype=complex)
        for i in range(dim):
            for j in range(dim):
                m[i, j] = complex(
                    0.4 * np.sin(salt + 2.0 * i + 5.0 * j), 0.3 * np.cos(1.0 + salt + i * j)
                )
        return m

    x = det_mat(6, 1.0)
    write_complex_matrix(
        os.path.join(OUT, "expm_det6.txt"), expm(x), "expm of det_mat(6, 1.0) via scipy"
    )

    # Wigner samples: state = normalized superposition over Fock 0..5 of
    # coefficients c_n = (1+n)^{-1} * exp(i n), on a dim-48 space, brute-force
    # displaced parity, X-plane convention (factor 1/4, beta = X1 + i X2).
    dim, pad = 48, 160
    c = np.array([np.exp(1j * n) / (1.0 + n) for n in range(6)], dtype=complex)
    c /= np.linalg.norm(c)
    psi = np.zeros(pad, dtype=complex)
    psi[:6] = c
    rho = np.outer(psi, psi.conj())
    ap = annihilation(pad)
    parity = np.diag((-1.0) ** np.arange(pad)).astype(complex)
    pts = [(0.0, 0.0), (1.0, 0.0), (0.0, -1.5), (2.0, 1.0), (-3.0, 2.5), (0.5, 0.25)]
    with open(os.path.join(OUT, "wigner_samples.txt"), "w") as fh:
        fh.write("# X1 X2 W for the deterministic 6-level state, brute-force reference\n")
        for x1, x2 in pts:
            alpha = 0.5 * (x1 + 1j * x2)
            dop = expm(alpha * ap.conj().T - np.conj(alpha) * ap)
            w = (2.0 / np.pi) * np.trace(rho @ dop @ parity @ dop.conj().T).real / 4.0
            fh.write(f"{float(x1)!r} {float(x2)!r} {float(w)!r}\n")

    print("fixtures written to", os.path.abspath(OUT))


if __name__ == "__main__":
    main()
