"""Numba-compiled hot loops: collision search, streaming statistics, walks.

Everything is deterministic given explicit uint64 seeds; parallel kernels
write only to per-chunk or per-trajectory slots and are reduced in index
order by the callers, so results do not depend on the thread count.

The RNG is xoshiro256++ seeded through the splitmix64 finalizer; `rng.py`
carries the pure-Python mirror and the two must stay bit-identical.
"""

import numpy as np
from numba import njit, prange

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_DNORM = 1.0 / 9007199254740992.0  # 2**-53

# site packing: 6 bits obstacle | 29 bits x | 29 bits y
CELL_LIMIT = np.int64(1 << 28)
MAX_OBSTACLES = 63

EPS_GRAZE = 1e-12
_EPS_T = 1e-14  # below this a root is the departure point itself
_MAX_GRAZE_RETRIES = 8

STATUS_OK = 0
STATUS_HORIZON = 1
STATUS_GRAZING = 2
STATUS_CELL_RANGE = 3

INIT_STATIONARY = 0
INIT_UNIFORM_Q = 1


# ---------------------------------------------------------------------------
# RNG
# ---------------------------------------------------------------------------

@njit(cache=True, inline="always")
def _mix64(x):
    x ^= x >> np.uint64(30)
    x *= _M1
    x ^= x >> np.uint64(27)
    x *= _M2
    x ^= x >> np.uint64(31)
    return x


@njit(cache=True, inline="always")
def _stream_seed(master, index):
    return master ^ _mix64(index + GOLDEN)


@njit(cache=True, inline="always")
def _xo_init(state, seed):
    state[0] = _mix64(seed + GOLDEN)
    state[1] = _mix64(seed + np.uint64(2) * GOLDEN)
    state[2] = _mix64(seed + np.uint64(3) * GOLDEN)
    state[3] = _mix64(seed + np.uint64(4) * GOLDEN)
    if state[0] | state[1] | state[2] | state[3] == np.uint64(0):
        state[0] = GOLDEN


@njit(cache=True, inline="always")
def _rotl(x, k):
    return (x << k) | (x >> (np.uint64(64) - k))


@njit(cache=True, inline="always")
def _xo_next(state):
    s0 = state[0]
    s1 = state[1]
    s2 = state[2]
    s3 = state[3]
    result = _rotl(s0 + s3, np.uint64(23)) + s0
    t = s1 << np.uint64(17)
    s2 ^= s0
    s3 ^= s1
    s1 ^= s2
    s0 ^= s3
    s2 ^= t
    s3 = _rotl(s3, np.uint64(45))
    state[0] = s0
    state[1] = s1
    state[2] = s2
    state[3] = s3
    return result


@njit(cache=True, inline="always")
def _xo_double(state):
    return (_xo_next(state) >> np.uint64(11)) * _DNORM


# ---------------------------------------------------------------------------
# collision search
# ---------------------------------------------------------------------------

@njit(cache=True)
def _ray_to_hit(cxs, cys, rs, px, py, vx, vy, cell_cap):
    """First disk hit along the ray (px,py) + t(vx,vy), t > 0.

    Integer grid walk over unit cells; every visited cell is tested together
    with its 8 neighbors (radii < 1/2, so a disk reaching a cell has its
    center there or adjacent). Returns (status, j, mx, my, t, s) with (mx,my)
    the lattice translate of the hit disk in the caller's frame and
    s = sqrt of the discriminant, i.e. r * |<v, n>| at the hit.
    """
    nd = rs.shape[0]
    mx = np.int64(np.floor(px))
    my = np.int64(np.floor(py))
    if vx > 0.0:
        stepx = np.int64(1)
        tmaxx = (mx + 1.0 - px) / vx
        tdx = 1.0 / vx
    elif vx < 0.0:
        stepx = np.int64(-1)
        tmaxx = (mx - px) / vx
        tdx = -1.0 / vx
    else:
        stepx = np.int64(0)
        tmaxx = np.inf
        tdx = np.inf
    if vy > 0.0:
        stepy = np.int64(1)
        tmaxy = (my + 1.0 - py) / vy
        tdy = 1.0 / vy
    elif vy < 0.0:
        stepy = np.int64(-1)
        tmaxy = (my - py) / vy
        tdy = -1.0 / vy
    else:
        stepy = np.int64(0)
        tmaxy = np.inf
        tdy = np.inf

    best_t = np.inf
    bs = 0.0
    bj = np.int64(-1)
    bmx = np.int64(0)
    bmy = np.int64(0)

    for ax in range(mx - 1, mx + 2):
        for ay in range(my - 1, my + 2):
            for j in range(nd):
                dx = px - (cxs[j] + ax)
                dy = py - (cys[j] + ay)
                b = dx * vx + dy * vy
                if b < 0.0:
                    disc = b * b - (dx * dx + dy * dy - rs[j] * rs[j])
                    if disc > 0.0:
                        s = np.sqrt(disc)
                        t = -b - s
                        if _EPS_T < t < best_t:
                            best_t = t
                            bs = s
                            bj = j
                            bmx = ax
                            bmy = ay

    steps = 0
    while steps < cell_cap:
        tnext = tmaxx if tmaxx < tmaxy else tmaxy
        if best_t <= tnext:
            return (STATUS_OK, bj, bmx, bmy, best_t, bs)
        if tmaxx <= tmaxy:
            mx += stepx
            tmaxx += tdx
            lead = mx + stepx
            for ay in range(my - 1, my + 2):
                for j in range(nd):
                    dx = px - (cxs[j] + lead)
                    dy = py - (cys[j] + ay)
                    b = dx * vx + dy * vy
                    if b < 0.0:
                        disc = b * b - (dx * dx + dy * dy - rs[j] * rs[j])
                        if disc > 0.0:
                            s = np.sqrt(disc)
                            t = -b - s
                            if _EPS_T < t < best_t:
                                best_t = t
                                bs = s
                                bj = j
                                bmx = lead
                                bmy = ay
        else:
            my += stepy
            tmaxy += tdy
            lead = my + stepy
            for ax in range(mx - 1, mx + 2):
                for j in range(nd):
                    dx = px - (cxs[j] + ax)
                    dy = py - (cys[j] + lead)
                    b = dx * vx + dy * vy
                    if b < 0.0:
                        disc = b * b - (dx * dx + dy * dy - rs[j] * rs[j])
                        if disc > 0.0:
                            s = np.sqrt(disc)
                            t = -b - s
                            if _EPS_T < t < best_t:
                                best_t = t
                                bs = s
                                bj = j
                                bmx = ax
                                bmy = lead
        steps += 1
    # cap reached: either no obstacle at all or a candidate too far to confirm
    return (STATUS_HORIZON, np.int64(-1), np.int64(0), np.int64(0), 0.0, 0.0)


@njit(cache=True)
def _collide(cxs, cys, rs, ox, cx, cy, px, py, vx, vy, cell_cap):
    """One step of the collision map.

    State: obstacle ox, lattice cell (cx,cy), position (px,py) local to that
    cell, unit outgoing direction (vx,vy). The hit point is re-projected onto
    the exact circle before reflecting, and the reflected direction is
    renormalized, so neither drifts over long runs.

    Returns (status, ox, cx, cy, px, py, vx, vy, free_path, specular_dev,
    graze_retries).
    """
    retries = np.int64(0)
    while True:
        st, j, mx, my, t, s = _ray_to_hit(cxs, cys, rs, px, py, vx, vy, cell_cap)
        if st != STATUS_OK:
            return (st, ox, cx, cy, px, py, vx, vy, 0.0, 0.0, retries)
        if s < EPS_GRAZE * rs[j]:
            # tangential: measure zero; rotate by ~1 ulp and retry
            if retries >= _MAX_GRAZE_RETRIES:
                return (STATUS_GRAZING, ox, cx, cy, px, py, vx, vy, 0.0, 0.0, retries)
            wx = vx - vy * 1e-14
            wy = vy + vx * 1e-14
            inv = 1.0 / np.sqrt(wx * wx + wy * wy)
            vx = wx * inv
            vy = wy * inv
            retries += 1
            continue
        hx = px + t * vx - (cxs[j] + mx)
        hy = py + t * vy - (cys[j] + my)
        scale = rs[j] / np.sqrt(hx * hx + hy * hy)
        hx *= scale
        hy *= scale
        nxu = hx / rs[j]
        nyu = hy / rs[j]
        dvn = vx * nxu + vy * nyu
        wx = vx - 2.0 * dvn * nxu
        wy = vy - 2.0 * dvn * nyu
        inv = 1.0 / np.sqrt(wx * wx + wy * wy)
        wx *= inv
        wy *= inv
        specdev = abs(dvn + (wx * nxu + wy * nyu))
        return (
            STATUS_OK,
            j,
            cx + mx,
            cy + my,
            cxs[j] + hx,
            cys[j] + hy,
            wx,
            wy,
            t,
            specdev,
            retries,
        )


# ---------------------------------------------------------------------------
# initial states
# ---------------------------------------------------------------------------

@njit(cache=True)
def _sample_stationary(cxs, cys, rs, cum, state):
    """Draw from the invariant collision measure.

    Obstacle with probability proportional to perimeter, boundary angle
    uniform, sin(incidence) uniform on (-1,1). Draw order: obstacle, angle,
    incidence (the Python mirror must match).
    """
    u = _xo_double(state)
    j = np.int64(0)
    while j < cum.shape[0] - 1 and u >= cum[j]:
        j += 1
    theta = 6.283185307179586 * _xo_double(state)
    sphi = 2.0 * _xo_double(state) - 1.0
    phi = np.arcsin(sphi)
    a = theta + phi
    return (
        j,
        cxs[j] + rs[j] * np.cos(theta),
        cys[j] + rs[j] * np.sin(theta),
        np.cos(a),
        np.sin(a),
    )


@njit(cache=True)
def _sample_uniform_q(cxs, cys, rs, state, cell_cap):
    """Uniform position in the free domain and uniform direction, pulled back
    to the previous collision (flow the reversed velocity to its first hit).

    Returns (status, ox, cellx, celly, px, py, vx, vy).
    """
    nd = rs.shape[0]
    while True:
        x = _xo_double(state)
        y = _xo_double(state)
        inside = False
        for j in range(nd):
            for ax in range(-1, 2):
                for ay in range(-1, 2):
                    dx = x - (cxs[j] + ax)
                    dy = y - (cys[j] + ay)
                    if dx * dx + dy * dy <= rs[j] * rs[j]:
                        inside = True
                        break
                if inside:
                    break
            if inside:
                break
        if inside:
            continue
        psi = 6.283185307179586 * _xo_double(state)
        vx = np.cos(psi)
        vy = np.sin(psi)
        st, j, mx, my, t, s = _ray_to_hit(cxs, cys, rs, x, y, -vx, -vy, cell_cap)
        if st != STATUS_OK:
            return (st, np.int64(0), np.int64(0), np.int64(0), 0.0, 0.0, 0.0, 0.0)
        if s < EPS_GRAZE * rs[j]:
            continue  # tangential pullback: resample
        hx = x - t * vx - (cxs[j] + mx)
        hy = y - t * vy - (cys[j] + my)
        scale = rs[j] / np.sqrt(hx * hx + hy * hy)
        hx *= scale
        hy *= scale
        return (STATUS_OK, j, mx, my, cxs[j] + hx, cys[j] + hy, vx, vy)


@njit(cache=True)
def _init_state(cxs, cys, rs, cum, state, init_mode, cell_cap):
    if init_mode == INIT_UNIFORM_Q:
        return _sample_uniform_q(cxs, cys, rs, state, cell_cap)
    j, px, py, vx, vy = _sample_stationary(cxs, cys, rs, cum, state)
    return (STATUS_OK, j, np.int64(0), np.int64(0), px, py, vx, vy)


# ---------------------------------------------------------------------------
# recording / auditing runs
# ---------------------------------------------------------------------------

@njit(cache=True)
def _record_run(cxs, cys, rs, cum, seed, n, init_mode, cell_cap,
                obs, cellx, celly, free, posx, posy, dirx, diry):
    """Trajectory with full per-collision record (absolute positions)."""
    state = np.empty(4, np.uint64)
    _xo_init(state, seed)
    st, ox, cx, cy, px, py, vx, vy = _init_state(
        cxs, cys, rs, cum, state, init_mode, cell_cap
    )
    if st != STATUS_OK:
        return (st, np.int64(0), ox, cx, cy, px, py, vx, vy)
    ox0, cx0, cy0, px0, py0, vx0, vy0 = ox, cx, cy, px, py, vx, vy
    grazings = np.int64(0)
    for k in range(n):
        st, ox, cx, cy, px, py, vx, vy, t, sd, rt = _collide(
            cxs, cys, rs, ox, cx, cy, px, py, vx, vy, cell_cap
        )
        if st != STATUS_OK:
            return (st, grazings, ox0, cx0, cy0, px0, py0, vx0, vy0)
        grazings += rt
        obs[k] = ox
        cellx[k] = cx
        celly[k] = cy
        free[k] = t
        posx[k] = cx + px
        posy[k] = cy + py
        dirx[k] = vx
        diry[k] = vy
    return (STATUS_OK, grazings, ox0, cx0, cy0, px0, py0, vx0, vy0)


@njit(cache=True)
def _audit_run(cxs, cys, rs, cum, seed, n, init_mode, cell_cap):
    """Invariant audit: max specular deviation, max free path, max unit-speed
    deviation, grazing retries over n collisions."""
    state = np.empty(4, np.uint64)
    _xo_init(state, seed)
    st, ox, cx, cy, px, py, vx, vy = _init_state(
        cxs, cys, rs, cum, state, init_mode, cell_cap
    )
    max_sd = 0.0
    max_free = 0.0
    max_unit = 0.0
    grazings = np.int64(0)
    if st != STATUS_OK:
        return (st, max_sd, max_free, max_unit, grazings)
    for k in range(n):
        st, ox, cx, cy, px, py, vx, vy, t, sd, rt = _collide(
            cxs, cys, rs, ox, cx, cy, px, py, vx, vy, cell_cap
        )
        if st != STATUS_OK:
            return (st, max_sd, max_free, max_unit, grazings)
        grazings += rt
        if sd > max_sd:
            max_sd = sd
        if t > max_free:
            max_free = t
        du = abs(np.sqrt(vx * vx + vy * vy) - 1.0)
        if du > max_unit:
            max_unit = du
    return (STATUS_OK, max_sd, max_free, max_unit, grazings)


@njit(cache=True)
def _collision_samples(cxs, cys, rs, cum, master, m, k_sub, cell_cap, arcpos, sinphi):
    """m independent stationary trajectories, each advanced k_sub collisions;
    records (global arc position fraction, sin incidence) of the final state."""
    total = 0.0
    for j in range(rs.shape[0]):
        total += rs[j]
    state = np.empty(4, np.uint64)
    for i in range(m):
        _xo_init(state, _stream_seed(master, np.uint64(i)))
        ox, px, py, vx, vy = _sample_stationary(cxs, cys, rs, cum, state)
        cx = np.int64(0)
        cy = np.int64(0)
        for k in range(k_sub):
            st, ox, cx, cy, px, py, vx, vy, t, sd, rt = _collide(
                cxs, cys, rs, ox, cx, cy, px, py, vx, vy, cell_cap
            )
            if st != STATUS_OK:
                return st
        hx = px - cxs[ox]
        hy = py - cys[ox]
        theta = np.arctan2(hy, hx)
        if theta < 0.0:
            theta += 6.283185307179586
        prior = 0.0
        for j in range(ox):
            prior += rs[j]
        arcpos[i] = (prior + rs[ox] * theta / 6.283185307179586) / total
        nxu = hx / rs[ox]
        nyu = hy / rs[ox]
        sinphi[i] = nxu * vy - nyu * vx
    return STATUS_OK


# ---------------------------------------------------------------------------
# streaming self-intersection count
# ---------------------------------------------------------------------------

@njit(cache=True, inline="always")
def _pack_site(ox, cx, cy):
    return (
        (np.uint64(ox) << np.uint64(58))
        | (np.uint64(cx + CELL_LIMIT) << np.uint64(29))
        | np.uint64(cy + CELL_LIMIT)
    )


@njit(cache=True, inline="always")
def _visit_site(keys, counts, used, used_n, mask, key):
    """Open-addressing multiset increment; returns (prior count, new used_n)."""
    h = _mix64(key) & mask
    while True:
        k = keys[h]
        if k == key:
            m = counts[h]
            counts[h] = m + 1
            return (m, used_n)
        if k == np.uint64(0):
            keys[h] = key
            counts[h] = np.int64(1)
            used[used_n] = np.int64(h)
            return (np.int64(0), used_n + 1)
        h = (h + np.uint64(1)) & mask


@njit(cache=True)
def _v_run(cxs, cys, rs, cum, seed, n_max, cps, init_mode, cell_cap,
           keys, counts, used, out_v, out_sx, out_sy):
    """Single trajectory; streams V_n and records (V, S) at checkpoints.

    Returns (status, used_n, grazings). The hash arrays must be clean (all
    zero); the caller zeroes the used slots afterwards for reuse.
    """
    state = np.empty(4, np.uint64)
    _xo_init(state, seed)
    st, ox, cx, cy, px, py, vx, vy = _init_state(
        cxs, cys, rs, cum, state, init_mode, cell_cap
    )
    used_n = np.int64(0)
    grazings = np.int64(0)
    if st != STATUS_OK:
        return (st, used_n, grazings)
    mask = np.uint64(keys.shape[0] - 1)
    v = np.int64(0)
    ci = 0
    for k in range(1, n_max + 1):
        st, ox, cx, cy, px, py, vx, vy, t, sd, rt = _collide(
            cxs, cys, rs, ox, cx, cy, px, py, vx, vy, cell_cap
        )
        if st != STATUS_OK:
            return (st, used_n, grazings)
        grazings += rt
        if (
            cx <= -CELL_LIMIT or cx >= CELL_LIMIT
            or cy <= -CELL_LIMIT or cy >= CELL_LIMIT
        ):
            return (STATUS_CELL_RANGE, used_n, grazings)
        m, used_n = _visit_site(
            keys, counts, used, used_n, mask, _pack_site(ox, cx, cy)
        )
        v += 2 * m + 1
        if ci < cps.shape[0] and k == cps[ci]:
            out_v[ci] = v
            out_sx[ci] = cx
            out_sy[ci] = cy
            ci += 1
    return (STATUS_OK, used_n, grazings)


@njit(cache=True)
def _hash_capacity(n_max):
    cap = 64
    while cap < 2 * (n_max + 2):
        cap *= 2
    return cap


@njit(cache=True, parallel=True)
def _ensemble_billiard(cxs, cys, rs, cum, seeds, n_max, cps, init_mode,
                       cell_cap, n_chunks, out_v, out_sx, out_sy, stat, graz):
    """Independent trajectories in fixed chunks; per-trajectory output slots."""
    m_total = seeds.shape[0]
    cap = _hash_capacity(n_max)
    for c in prange(n_chunks):
        keys = np.zeros(cap, np.uint64)
        counts = np.zeros(cap, np.int64)
        used = np.empty(n_max + 1, np.int64)
        lo = (m_total * c) // n_chunks
        hi = (m_total * (c + 1)) // n_chunks
        st_c = np.int64(0)
        g = np.int64(0)
        for j in range(lo, hi):
            st, used_n, gr = _v_run(
                cxs, cys, rs, cum, seeds[j], n_max, cps, init_mode, cell_cap,
                keys, counts, used, out_v[j], out_sx[j], out_sy[j],
            )
            g += gr
            for i in range(used_n):
                keys[used[i]] = np.uint64(0)
                counts[used[i]] = np.int64(0)
            if st != STATUS_OK:
                st_c = st
                break
        stat[c] = st_c
        graz[c] = g


@njit(cache=True, parallel=True)
def _returns_billiard(cxs, cys, rs, cum, seeds, ks, init_mode, cell_cap,
                      n_chunks, hits, stat):
    """Counts per chunk of trajectories returning to the initial site at each
    lag in ks (sorted). Integer reduction: order independent."""
    m_total = seeds.shape[0]
    n_k = ks.shape[0]
    k_max = ks[n_k - 1]
    for c in prange(n_chunks):
        lo = (m_total * c) // n_chunks
        hi = (m_total * (c + 1)) // n_chunks
        st_c = np.int64(0)
        state = np.empty(4, np.uint64)
        for j in range(lo, hi):
            _xo_init(state, seeds[j])
            st, ox, cx, cy, px, py, vx, vy = _init_state(
                cxs, cys, rs, cum, state, init_mode, cell_cap
            )
            if st != STATUS_OK:
                st_c = st
                break
            ox0 = ox
            cx0 = cx
            cy0 = cy
            ci = 0
            for k in range(1, k_max + 1):
                st, ox, cx, cy, px, py, vx, vy, t, sd, rt = _collide(
                    cxs, cys, rs, ox, cx, cy, px, py, vx, vy, cell_cap
                )
                if st != STATUS_OK:
                    st_c = st
                    break
                if k == ks[ci]:
                    if ox == ox0 and cx == cx0 and cy == cy0:
                        hits[c, ci] += 1
                    ci += 1
                    if ci == n_k:
                        break
            if st_c != STATUS_OK:
                break
        stat[c] = st_c


@njit(cache=True)
def _displacement_steps(cxs, cys, rs, cum, seed, n_steps, burn_in, init_mode,
                        cell_cap, out_xi):
    """Per-collision cell displacements of one long trajectory (for the
    summed-autocovariance diffusion estimate)."""
    state = np.empty(4, np.uint64)
    _xo_init(state, seed)
    st, ox, cx, cy, px, py, vx, vy = _init_state(
        cxs, cys, rs, cum, state, init_mode, cell_cap
    )
    if st != STATUS_OK:
        return st
    for k in range(burn_in):
        st, ox, cx, cy, px, py, vx, vy, t, sd, rt = _collide(
            cxs, cys, rs, ox, cx, cy, px, py, vx, vy, cell_cap
        )
        if st != STATUS_OK:
            return st
    pcx = cx
    pcy = cy
    for k in range(n_steps):
        st, ox, cx, cy, px, py, vx, vy, t, sd, rt = _collide(
            cxs, cys, rs, ox, cx, cy, px, py, vx, vy, cell_cap
        )
        if st != STATUS_OK:
            return st
        out_xi[k, 0] = cx - pcx
        out_xi[k, 1] = cy - pcy
        pcx = cx
        pcy = cy
    return STATUS_OK


@njit(cache=True, parallel=True)
def _probe_rays(cxs, cys, rs, xs, ys, angles, cell_cap, out_t):
    """Free-flight length from arbitrary points/directions (inf if capped)."""
    for i in prange(xs.shape[0]):
        vx = np.cos(angles[i])
        vy = np.sin(angles[i])
        st, j, mx, my, t, s = _ray_to_hit(
            cxs, cys, rs, xs[i], ys[i], vx, vy, cell_cap
        )
        out_t[i] = t if st == STATUS_OK else np.inf


# ---------------------------------------------------------------------------
# baseline lazy lattice walk (pipeline oracle)
# ---------------------------------------------------------------------------

@njit(cache=True, inline="always")
def _walk_move(state, x, y):
    r = np.int64(5.0 * _xo_double(state))
    if r == 0:
        x += 1
    elif r == 1:
        x -= 1
    elif r == 2:
        y += 1
    elif r == 3:
        y -= 1
    return (x, y)


@njit(cache=True)
def _walk_v_run(seed, n_max, cps, keys, counts, used, out_v, out_sx, out_sy):
    state = np.empty(4, np.uint64)
    _xo_init(state, seed)
    x = np.int64(0)
    y = np.int64(0)
    mask = np.uint64(keys.shape[0] - 1)
    v = np.int64(0)
    used_n = np.int64(0)
    ci = 0
    for k in range(1, n_max + 1):
        x, y = _walk_move(state, x, y)
        if x <= -CELL_LIMIT or x >= CELL_LIMIT or y <= -CELL_LIMIT or y >= CELL_LIMIT:
            return (STATUS_CELL_RANGE, used_n)
        m, used_n = _visit_site(
            keys, counts, used, used_n, mask, _pack_site(np.int64(0), x, y)
        )
        v += 2 * m + 1
        if ci < cps.shape[0] and k == cps[ci]:
            out_v[ci] = v
            out_sx[ci] = x
            out_sy[ci] = y
            ci += 1
    return (STATUS_OK, used_n)


@njit(cache=True, parallel=True)
def _ensemble_walk(seeds, n_max, cps, n_chunks, out_v, out_sx, out_sy, stat):
    m_total = seeds.shape[0]
    cap = _hash_capacity(n_max)
    for c in prange(n_chunks):
        keys = np.zeros(cap, np.uint64)
        counts = np.zeros(cap, np.int64)
        used = np.empty(n_max + 1, np.int64)
        lo = (m_total * c) // n_chunks
        hi = (m_total * (c + 1)) // n_chunks
        st_c = np.int64(0)
        for j in range(lo, hi):
            st, used_n = _walk_v_run(
                seeds[j], n_max, cps, keys, counts, used,
                out_v[j], out_sx[j], out_sy[j],
            )
            for i in range(used_n):
                keys[used[i]] = np.uint64(0)
                counts[used[i]] = np.int64(0)
            if st != STATUS_OK:
                st_c = st
                break
        stat[c] = st_c


@njit(cache=True, parallel=True)
def _returns_walk(seeds, ks, n_chunks, hits):
    m_total = seeds.shape[0]
    n_k = ks.shape[0]
    k_max = ks[n_k - 1]
    for c in prange(n_chunks):
        lo = (m_total * c) // n_chunks
        hi = (m_total * (c + 1)) // n_chunks
        state = np.empty(4, np.uint64)
        for j in range(lo, hi):
            _xo_init(state, seeds[j])
            x = np.int64(0)
            y = np.int64(0)
            ci = 0
            for k in range(1, k_max + 1):
                x, y = _walk_move(state, x, y)
                if k == ks[ci]:
                    if x == 0 and y == 0:
                        hits[c, ci] += 1
                    ci += 1
                    if ci == n_k:
                        break


# ---------------------------------------------------------------------------
# importance-sampled simplex integral (three singular edges)
# ---------------------------------------------------------------------------

@njit(cache=True)
def _j_mc_sample(state):
    """One importance sample of the edge-singular simplex integrand.

    The proposal factorizes into a radial coordinate s = u+v+w drawn with
    density 2(1-s) and a barycentric part drawn from an equal mixture of the
    uniform triangle and a vertex-collapsed component matched to the 1/r
    blowup at the three corners (which are the images of the simplex edges).
    The importance weight f/q is bounded, so the estimator has finite
    variance; plain uniform sampling would not (log-divergent)."""
    while True:
        s = 1.0 - np.sqrt(1.0 - _xo_double(state))
        if s <= 0.0 or s >= 1.0:
            continue
        if _xo_double(state) < 0.5:
            a = _xo_double(state)
            b = _xo_double(state)
            if a + b > 1.0:
                a = 1.0 - a
                b = 1.0 - b
            c = 1.0 - a - b
        else:
            vtx = np.int64(3.0 * _xo_double(state))
            xi = _xo_double(state)
            mx = xi if xi > 1.0 - xi else 1.0 - xi
            t = _xo_double(state) / (1.0 + mx)
            s1 = t * xi
            s2 = t * (1.0 - xi)
            if vtx == 0:
                a = 1.0 - t
                b = s1
                c = s2
            elif vtx == 1:
                b = 1.0 - t
                a = s1
                c = s2
            else:
                c = 1.0 - t
                a = s1
                b = s2
        # density of the barycentric part at (a,b,c)
        if a >= b and a >= c:
            tt = b + c
            xi2 = b / tt if tt > 0.0 else 0.5
        elif b >= a and b >= c:
            tt = a + c
            xi2 = a / tt if tt > 0.0 else 0.5
        else:
            tt = a + b
            xi2 = a / tt if tt > 0.0 else 0.5
        if tt <= 0.0:
            continue  # exact vertex: measure zero
        mx2 = xi2 if xi2 > 1.0 - xi2 else 1.0 - xi2
        qb = 1.0 + (1.0 + mx2) * (1.0 / 6.0) / tt
        u = s * a
        v = s * b
        w = s * c
        den = u * v + u * w + v * w
        if den <= 0.0:
            continue
        f = (1.0 - u - v - w) / den
        q = 2.0 * (1.0 - s) * qb / (s * s)
        return f / q


@njit(cache=True, parallel=True)
def _j_mc(master, n_total, n_chunks, out_sum, out_sumsq):
    for c in prange(n_chunks):
        state = np.empty(4, np.uint64)
        _xo_init(state, _stream_seed(master, np.uint64(c)))
        lo = (n_total * c) // n_chunks
        hi = (n_total * (c + 1)) // n_chunks
        acc = 0.0
        acc2 = 0.0
        for i in range(lo, hi):
            x = _j_mc_sample(state)
            acc += x
            acc2 += x * x
        out_sum[c] = acc
        out_sumsq[c] = acc2


@njit(cache=True)
def _walk_displacement_steps(seed, n_steps, burn_in, out_xi):
    state = np.empty(4, np.uint64)
    _xo_init(state, seed)
    x = np.int64(0)
    y = np.int64(0)
    for k in range(burn_in):
        x, y = _walk_move(state, x, y)
    px = x
    py = y
    for k in range(n_steps):
        x, y = _walk_move(state, x, y)
        out_xi[k, 0] = x - px
        out_xi[k, 1] = y - py
        px = x
        py = y
    return STATUS_OK
