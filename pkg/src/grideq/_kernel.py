"""Fixed-step RK4 integration kernel for the converter network.

Everything is integrated in one global frame rotating at omega_b, with
complex d + jq per-unit states stored as (re, im) float pairs. Per-unit
inductor/capacitor equations carry the omega_b factor and the rotating
frame contributes the -j*omega_b cross-coupling on every electrical state.

State layout (float64):
  per node i, base 9*i:
    0 i_f_d  1 i_f_q   filter inductor current
    2 v_d    3 v_q     PCC capacitor voltage
    4 P_filt 5 Q_filt  droop low-pass states
    6 delta            converter angle relative to the global frame
    7 x_pll  8 d_hat   PLL integrator and PLL angle estimate
  per edge e=(i,j), base 9*n + 6*e:
    0 ie_d 1 ie_q      line current i -> j
    2 gij_d 3 gij_q    equivalent-voltage companion state, direction i
    4 gji_d 5 gji_q    companion state, direction j

The companion states g realize the heterogeneous equivalent-voltage
definition as an index-1 DAE: g_ij follows the branch filter driven by
(vt_i - v_j), and vt_i = (1/gamma_i) sum_j gamma_ij (v_j + r_ij g_ij)
keeps sum_j g_ij = 0 invariant. For homogeneous rho this reduces exactly
to the plain gamma-weighted neighbor average.

Control outputs (droop frequency/magnitude and the modulation reference)
are computed once per measurement sample and held over the oversampled
substeps. The PLL is measurement-only and never feeds the plant.
"""

import numpy as np
from numba import njit

STATUS_OK = 0
STATUS_NONFINITE = 1
STATUS_BLOWUP = 2

STATE_LIMIT = 1.0e3


@njit(cache=True)
def _deriv(y, dy, n, edges, gam_e, r_e, l_e, gam_node,
           r_f, l_f, c_f, w_c, pll_kp, pll_ki,
           u_loc_d, u_loc_q, w_cmd, w_b):
    ne = edges.shape[0]
    # per-node accumulators: line injection and vt numerator
    inj_d = np.zeros(n)
    inj_q = np.zeros(n)
    num_d = np.zeros(n)
    num_q = np.zeros(n)
    for e in range(ne):
        i = edges[e, 0]
        j = edges[e, 1]
        b = 9 * n + 6 * e
        ied = y[b]
        ieq = y[b + 1]
        inj_d[i] += ied
        inj_q[i] += ieq
        inj_d[j] -= ied
        inj_q[j] -= ieq
        g = gam_e[e]
        r = r_e[e]
        num_d[i] += g * (y[9 * j + 2] + r * y[b + 2])
        num_q[i] += g * (y[9 * j + 3] + r * y[b + 3])
        num_d[j] += g * (y[9 * i + 2] + r * y[b + 4])
        num_q[j] += g * (y[9 * i + 3] + r * y[b + 5])
    vt_d = np.zeros(n)
    vt_q = np.zeros(n)
    for i in range(n):
        if gam_node[i] > 0.0:
            vt_d[i] = num_d[i] / gam_node[i]
            vt_q[i] = num_q[i] / gam_node[i]
        else:
            # isolated node: no grid behind the PCC, vt degenerates to v
            vt_d[i] = y[9 * i + 2]
            vt_q[i] = y[9 * i + 3]

    for i in range(n):
        b = 9 * i
        ifd = y[b]
        ifq = y[b + 1]
        vd = y[b + 2]
        vq = y[b + 3]
        delta = y[b + 6]
        # modulation voltage in the global frame
        cd = np.cos(delta)
        sd = np.sin(delta)
        ud = u_loc_d[i] * cd - u_loc_q[i] * sd
        uq = u_loc_d[i] * sd + u_loc_q[i] * cd
        # filter inductor and PCC capacitor with rotating-frame coupling
        dy[b] = w_b / l_f[i] * (ud - vd - r_f[i] * ifd) + w_b * ifq
        dy[b + 1] = w_b / l_f[i] * (uq - vq - r_f[i] * ifq) - w_b * ifd
        dy[b + 2] = w_b / c_f[i] * (ifd - inj_d[i]) + w_b * vq
        dy[b + 3] = w_b / c_f[i] * (ifq - inj_q[i]) - w_b * vd
        # droop low-pass on instantaneous p.u. powers
        p = vd * ifd + vq * ifq
        q = vq * ifd - vd * ifq
        dy[b + 4] = w_c[i] * (p - y[b + 4])
        dy[b + 5] = w_c[i] * (q - y[b + 5])
        dy[b + 6] = w_b * (w_cmd[i] - 1.0)
        # SRF-PLL: drive Im{v e^{-j d_hat}} to zero
        dh = y[b + 8]
        ch = np.cos(dh)
        sh = np.sin(dh)
        e_q = -sh * vd + ch * vq
        dy[b + 7] = pll_ki[i] * e_q
        dy[b + 8] = pll_kp[i] * e_q + y[b + 7]

    for e in range(ne):
        i = edges[e, 0]
        j = edges[e, 1]
        b = 9 * n + 6 * e
        wl = w_b / l_e[e]
        r = r_e[e]
        vid = y[9 * i + 2]
        viq = y[9 * i + 3]
        vjd = y[9 * j + 2]
        vjq = y[9 * j + 3]
        dy[b] = wl * (vid - vjd - r * y[b]) + w_b * y[b + 1]
        dy[b + 1] = wl * (viq - vjq - r * y[b + 1]) - w_b * y[b]
        dy[b + 2] = wl * (vt_d[i] - vjd - r * y[b + 2]) + w_b * y[b + 3]
        dy[b + 3] = wl * (vt_q[i] - vjq - r * y[b + 3]) - w_b * y[b + 2]
        dy[b + 4] = wl * (vt_d[j] - vid - r * y[b + 4]) + w_b * y[b + 5]
        dy[b + 5] = wl * (vt_q[j] - viq - r * y[b + 5]) - w_b * y[b + 4]


@njit(cache=True)
def simulate_kernel(n, edges, gam_e, r_e, l_e, gam_node,
                    r_f, l_f, c_f, w_c, k_w, k_v,
                    w_ref, v_ref, p_ref, q_ref, pll_kp, pll_ki, delta0,
                    w_b, f_s, oversample, r_exc, ideal_pll):
    """Integrate the network; returns (status, fail_sample, records...)."""
    ne = edges.shape[0]
    n_samples = r_exc.shape[1]
    nstate = 9 * n + 6 * ne
    h = 1.0 / (f_s * oversample)

    y = np.zeros(nstate)
    for i in range(n):
        b = 9 * i
        cd = np.cos(delta0[i])
        sd = np.sin(delta0[i])
        vd = v_ref[i] * cd
        vq = v_ref[i] * sd
        y[b + 2] = vd
        y[b + 3] = vq
        # start the filter current on the capacitor's rotating-frame demand
        y[b] = -c_f[i] * vq
        y[b + 1] = c_f[i] * vd
        y[b + 5] = -c_f[i] * (vd * vd + vq * vq)
        y[b + 6] = delta0[i]
        y[b + 8] = delta0[i]

    dy = np.zeros(nstate)
    k2 = np.zeros(nstate)
    k3 = np.zeros(nstate)
    k4 = np.zeros(nstate)
    yt = np.zeros(nstate)
    u_loc_d = np.zeros(n)
    u_loc_q = np.zeros(n)
    w_cmd = np.zeros(n)

    i_loc = np.zeros((n, n_samples), dtype=np.complex128)
    v_loc = np.zeros((n, n_samples), dtype=np.complex128)
    vt_loc = np.zeros((n, n_samples), dtype=np.complex128)
    v_glob = np.zeros((n, n_samples), dtype=np.complex128)
    delta_rec = np.zeros((n, n_samples))
    dhat_rec = np.zeros((n, n_samples))
    i_lines = np.zeros((ne, n_samples), dtype=np.complex128)
    energy = np.zeros(n_samples)

    for k in range(n_samples):
        # health check on the raw state
        for s in range(nstate):
            if not np.isfinite(y[s]):
                return (STATUS_NONFINITE, k, i_loc, v_loc, vt_loc, v_glob,
                        delta_rec, dhat_rec, i_lines, energy)
            if np.abs(y[s]) > STATE_LIMIT:
                return (STATUS_BLOWUP, k, i_loc, v_loc, vt_loc, v_glob,
                        delta_rec, dhat_rec, i_lines, energy)

        # droop outputs from the filtered powers, held over the sample
        for i in range(n):
            b = 9 * i
            w_cmd[i] = w_ref[i] - k_w[i] * (y[b + 4] - p_ref[i])
            vmag = v_ref[i] - k_v[i] * (y[b + 5] - q_ref[i])
            u_loc_d[i] = vmag + r_exc[i, k].real
            u_loc_q[i] = r_exc[i, k].imag

        # record measurements at the sample instant
        for i in range(n):
            b = 9 * i
            vd = y[b + 2]
            vq = y[b + 3]
            inj_d = 0.0
            inj_q = 0.0
            for e in range(ne):
                if edges[e, 0] == i:
                    inj_d += y[9 * n + 6 * e]
                    inj_q += y[9 * n + 6 * e + 1]
                elif edges[e, 1] == i:
                    inj_d -= y[9 * n + 6 * e]
                    inj_q -= y[9 * n + 6 * e + 1]
            num_d = 0.0
            num_q = 0.0
            for e in range(ne):
                if edges[e, 0] == i or edges[e, 1] == i:
                    g = gam_e[e]
                    r = r_e[e]
                    bb = 9 * n + 6 * e
                    if edges[e, 0] == i:
                        jn = edges[e, 1]
                        num_d += g * (y[9 * jn + 2] + r * y[bb + 2])
                        num_q += g * (y[9 * jn + 3] + r * y[bb + 3])
                    else:
                        jn = edges[e, 0]
                        num_d += g * (y[9 * jn + 2] + r * y[bb + 4])
                        num_q += g * (y[9 * jn + 3] + r * y[bb + 5])
            if gam_node[i] > 0.0:
                vtd = num_d / gam_node[i]
                vtq = num_q / gam_node[i]
            else:
                vtd = vd
                vtq = vq
            ang = y[b + 6] if ideal_pll else y[b + 8]
            c = np.cos(ang)
            s = np.sin(ang)
            # rotate into the local measurement frame: x * e^{-j ang}
            v_loc[i, k] = complex(c * vd + s * vq, -s * vd + c * vq)
            i_loc[i, k] = complex(c * inj_d + s * inj_q, -s * inj_d + c * inj_q)
            vt_loc[i, k] = complex(c * vtd + s * vtq, -s * vtd + c * vtq)
            v_glob[i, k] = complex(vd, vq)
            delta_rec[i, k] = y[b + 6]
            dhat_rec[i, k] = y[b + 8]

        etot = 0.0
        for i in range(n):
            b = 9 * i
            etot += 0.5 * l_f[i] * (y[b] ** 2 + y[b + 1] ** 2)
            etot += 0.5 * c_f[i] * (y[b + 2] ** 2 + y[b + 3] ** 2)
        for e in range(ne):
            b = 9 * n + 6 * e
            i_lines[e, k] = complex(y[b], y[b + 1])
            etot += 0.5 * l_e[e] * (y[b] ** 2 + y[b + 1] ** 2)
        energy[k] = etot

        for _ in range(oversample):
            _deriv(y, dy, n, edges, gam_e, r_e, l_e, gam_node, r_f, l_f, c_f,
                   w_c, pll_kp, pll_ki, u_loc_d, u_loc_q, w_cmd, w_b)
            for s in range(nstate):
                yt[s] = y[s] + 0.5 * h * dy[s]
            _deriv(yt, k2, n, edges, gam_e, r_e, l_e, gam_node, r_f, l_f, c_f,
                   w_c, pll_kp, pll_ki, u_loc_d, u_loc_q, w_cmd, w_b)
            for s in range(nstate):
                yt[s] = y[s] + 0.5 * h * k2[s]
            _deriv(yt, k3, n, edges, gam_e, r_e, l_e, gam_node, r_f, l_f, c_f,
                   w_c, pll_kp, pll_ki, u_loc_d, u_loc_q, w_cmd, w_b)
            for s in range(nstate):
                yt[s] = y[s] + h * k3[s]
            _deriv(yt, k4, n, edges, gam_e, r_e, l_e, gam_node, r_f, l_f, c_f,
                   w_c, pll_kp, pll_ki, u_loc_d, u_loc_q, w_cmd, w_b)
            for s in range(nstate):
                y[s] += h / 6.0 * (dy[s] + 2.0 * k2[s] + 2.0 * k3[s] + k4[s])

    return (STATUS_OK, n_samples, i_loc, v_loc, vt_loc, v_glob,
            delta_rec, dhat_rec, i_lines, energy)
