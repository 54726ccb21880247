# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled O(N^2) dipole-dipole kernel fill (spherical sublevel basis)."""

from libc.math cimport sqrt, sin, cos

cdef double SQRT_HALF = 0.7071067811865476


def fill_kernel(const double[:, ::1] pos, double complex[:, ::1] out):
    """Fill ``out`` (3N x 3N) with the pair kernel; diagonal blocks set to 0.

    Every ordered pair is evaluated so that writes stay row-contiguous; the
    (j, i) block equals the (i, j) block bit for bit since the kernel is even
    in the separation vector.
    """
    cdef Py_ssize_t n = pos.shape[0]
    cdef Py_ssize_t i, j, a, b
    cdef double dx, dy, dz, r, inv, nx, ny, nz, c, s, x2, inv3
    cdef double ar, ai, br, bi, car, cai, cbr, cbi
    cdef double wr[3]
    cdef double wi[3]
    cdef double pr, pi_, vr, vi
    if out.shape[0] != 3 * n or out.shape[1] != 3 * n:
        raise ValueError("output shape must be (3N, 3N)")
    with nogil:
        for i in range(n):
            for j in range(n):
                if j == i:
                    for a in range(3):
                        for b in range(3):
                            out[3 * i + a, 3 * i + b] = 0.0
                    continue
                dx = pos[i, 0] - pos[j, 0]
                dy = pos[i, 1] - pos[j, 1]
                dz = pos[i, 2] - pos[j, 2]
                r = sqrt(dx * dx + dy * dy + dz * dz)
                inv = 1.0 / r
                nx = dx * inv
                ny = dy * inv
                nz = dz * inv
                c = cos(r)
                s = sin(r)
                x2 = r * r
                inv3 = inv * inv * inv
                # a = (1 - i r - r^2) e^{ir} / r^3 ; b = (3 - 3 i r - r^2) e^{ir} / r^3
                ar = ((1.0 - x2) * c + r * s) * inv3
                ai = ((1.0 - x2) * s - r * c) * inv3
                br = ((3.0 - x2) * c + 3.0 * r * s) * inv3
                bi = ((3.0 - x2) * s - 3.0 * r * c) * inv3
                car = -1.5 * ar
                cai = -1.5 * ai
                cbr = 1.5 * br
                cbi = 1.5 * bi
                # w_m = n . e_m for m = -1, 0, +1
                wr[0] = nx * SQRT_HALF
                wi[0] = -ny * SQRT_HALF
                wr[1] = nz
                wi[1] = 0.0
                wr[2] = -nx * SQRT_HALF
                wi[2] = -ny * SQRT_HALF
                for a in range(3):
                    for b in range(3):
                        # conj(w_a) * w_b
                        pr = wr[a] * wr[b] + wi[a] * wi[b]
                        pi_ = wr[a] * wi[b] - wi[a] * wr[b]
                        vr = cbr * pr - cbi * pi_
                        vi = cbr * pi_ + cbi * pr
                        if a == b:
                            vr = vr + car
                            vi = vi + cai
                        out[3 * i + a, 3 * j + b] = vr + 1j * vi
