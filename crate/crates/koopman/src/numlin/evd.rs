//! Real nonsymmetric eigendecomposition: Householder reduction to upper
//! Hessenberg form followed by the shifted double QR iteration, eigenvectors
//! recovered by back-substitution on the real Schur form.
//!
//! Port of the public-domain JAMA `EigenvalueDecomposition` nonsymmetric
//! path (itself derived from the EISPACK Algol procedures `orthes` and
//! `hqr2`). Eigenvalues come back as (re, im) pairs in `d`/`e`; complex
//! conjugate pairs occupy adjacent slots with the positive imaginary part
//! first. Eigenvectors are packed in the JAMA convention: a real eigenvalue
//! at slot j owns column j of `v`; a conjugate pair at slots (j, j+1) owns
//! columns j and j+1 as real and imaginary parts of the first member.

use nalgebra::DMatrix;

pub(crate) struct RealEvd {
    pub d: Vec<f64>,
    pub e: Vec<f64>,
    pub v: DMatrix<f64>,
}

/// Total QR sweep budget; EISPACK uses 30 per eigenvalue, we allow slack.
fn iteration_budget(n: usize) -> usize {
    60 * n.max(1)
}

pub(crate) fn real_evd(a: &DMatrix<f64>) -> Option<RealEvd> {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    let mut h = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];

    if n == 1 {
        d[0] = a[(0, 0)];
        return Some(RealEvd { d, e, v });
    }

    orthes(&mut h, &mut v);
    if hqr2(&mut h, &mut v, &mut d, &mut e) {
        Some(RealEvd { d, e, v })
    } else {
        None
    }
}

// Householder reduction to Hessenberg form, accumulating the orthogonal
// similarity transform into `v`.
fn orthes(h: &mut DMatrix<f64>, v: &mut DMatrix<f64>) {
    let n = h.nrows();
    let low = 0usize;
    let high = n - 1;
    let mut ort = vec![0.0; n];

    for m in (low + 1)..high {
        let mut scale = 0.0;
        for i in m..=high {
            scale += h[(i, m - 1)].abs();
        }
        if scale != 0.0 {
            // Householder vector for column m-1.
            let mut hsum = 0.0;
            for i in (m..=high).rev() {
                ort[i] = h[(i, m - 1)] / scale;
                hsum += ort[i] * ort[i];
            }
            let mut g = hsum.sqrt();
            if ort[m] > 0.0 {
                g = -g;
            }
            hsum -= ort[m] * g;
            ort[m] -= g;

            // H = (I - u u'/h) H (I - u u'/h)
            for j in m..n {
                let mut f = 0.0;
                for i in (m..=high).rev() {
                    f += ort[i] * h[(i, j)];
                }
                f /= hsum;
                for i in m..=high {
                    h[(i, j)] -= f * ort[i];
                }
            }
            for i in 0..=high {
                let mut f = 0.0;
                for j in (m..=high).rev() {
                    f += ort[j] * h[(i, j)];
                }
                f /= hsum;
                for j in m..=high {
                    h[(i, j)] -= f * ort[j];
                }
            }
            ort[m] *= scale;
            h[(m, m - 1)] = scale * g;
        }
    }

    // Accumulate transformations.
    for m in ((low + 1)..high).rev() {
        if h[(m, m - 1)] != 0.0 {
            for i in (m + 1)..=high {
                ort[i] = h[(i, m - 1)];
            }
            for j in m..=high {
                let mut g = 0.0;
                for i in m..=high {
                    g += ort[i] * v[(i, j)];
                }
                // Double division avoids possible underflow.
                g = (g / ort[m]) / h[(m, m - 1)];
                for i in m..=high {
                    v[(i, j)] += g * ort[i];
                }
            }
        }
    }
}

// Complex scalar division avoiding overflow.
fn cdiv(xr: f64, xi: f64, yr: f64, yi: f64) -> (f64, f64) {
    if yr.abs() > yi.abs() {
        let r = yi / yr;
        let den = yr + r * yi;
        ((xr + r * xi) / den, (xi - r * xr) / den)
    } else {
        let r = yr / yi;
        let den = yi + r * yr;
        ((r * xr + xi) / den, (r * xi - xr) / den)
    }
}

// Hessenberg to real Schur form, eigenvalues into d/e, eigenvectors of the
// original matrix accumulated into v. Returns false if the QR iteration
// exhausts its budget.
#[allow(clippy::too_many_lines)]
fn hqr2(hm: &mut DMatrix<f64>, vm: &mut DMatrix<f64>, d: &mut [f64], e: &mut [f64]) -> bool {
    macro_rules! h {
        ($i:expr, $j:expr) => {
            hm[($i as usize, $j as usize)]
        };
    }
    macro_rules! v {
        ($i:expr, $j:expr) => {
            vm[($i as usize, $j as usize)]
        };
    }

    let nn = hm.nrows() as isize;
    let mut n: isize = nn - 1;
    let low: isize = 0;
    let high: isize = nn - 1;
    let eps = 2.0_f64.powi(-52);
    let mut exshift = 0.0;
    let (mut p, mut q, mut r, mut s, mut z) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let (mut t, mut w, mut x, mut y);

    let mut norm = 0.0;
    for i in 0..nn {
        for j in (i - 1).max(0)..nn {
            norm += h![i, j].abs();
        }
    }

    let budget = iteration_budget(nn as usize);
    let mut total_iter = 0usize;
    let mut iter = 0;
    while n >= low {
        // Look for a single small sub-diagonal element.
        let mut l = n;
        while l > low {
            s = h![l - 1, l - 1].abs() + h![l, l].abs();
            if s == 0.0 {
                s = norm;
            }
            if h![l, l - 1].abs() < eps * s {
                break;
            }
            l -= 1;
        }

        if l == n {
            // One root found.
            h![n, n] += exshift;
            d[n as usize] = h![n, n];
            e[n as usize] = 0.0;
            n -= 1;
            iter = 0;
        } else if l == n - 1 {
            // Two roots found.
            w = h![n, n - 1] * h![n - 1, n];
            p = (h![n - 1, n - 1] - h![n, n]) / 2.0;
            q = p * p + w;
            z = q.abs().sqrt();
            h![n, n] += exshift;
            h![n - 1, n - 1] += exshift;
            x = h![n, n];

            if q >= 0.0 {
                // Real pair.
                z = if p >= 0.0 { p + z } else { p - z };
                d[(n - 1) as usize] = x + z;
                d[n as usize] = d[(n - 1) as usize];
                if z != 0.0 {
                    d[n as usize] = x - w / z;
                }
                e[(n - 1) as usize] = 0.0;
                e[n as usize] = 0.0;
                x = h![n, n - 1];
                s = x.abs() + z.abs();
                p = x / s;
                q = z / s;
                r = (p * p + q * q).sqrt();
                p /= r;
                q /= r;

                for j in (n - 1)..nn {
                    z = h![n - 1, j];
                    h![n - 1, j] = q * z + p * h![n, j];
                    h![n, j] = q * h![n, j] - p * z;
                }
                for i in 0..=n {
                    z = h![i, n - 1];
                    h![i, n - 1] = q * z + p * h![i, n];
                    h![i, n] = q * h![i, n] - p * z;
                }
                for i in low..=high {
                    z = v![i, n - 1];
                    v![i, n - 1] = q * z + p * v![i, n];
                    v![i, n] = q * v![i, n] - p * z;
                }
            } else {
                // Complex pair.
                d[(n - 1) as usize] = x + p;
                d[n as usize] = x + p;
                e[(n - 1) as usize] = z;
                e[n as usize] = -z;
            }
            n -= 2;
            iter = 0;
        } else {
            // No convergence yet: form shift.
            x = h![n, n];
            y = 0.0;
            w = 0.0;
            if l < n {
                y = h![n - 1, n - 1];
                w = h![n, n - 1] * h![n - 1, n];
            }

            // Wilkinson's original ad hoc shift.
            if iter == 10 {
                exshift += x;
                for i in low..=n {
                    h![i, i] -= x;
                }
                s = h![n, n - 1].abs() + h![n - 1, n - 2].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }

            // MATLAB's new ad hoc shift.
            if iter == 30 {
                s = (y - x) / 2.0;
                s = s * s + w;
                if s > 0.0 {
                    s = s.sqrt();
                    if y < x {
                        s = -s;
                    }
                    s = x - w / ((y - x) / 2.0 + s);
                    for i in low..=n {
                        h![i, i] -= s;
                    }
                    exshift += s;
                    x = 0.964;
                    y = x;
                    w = x;
                }
            }

            iter += 1;
            total_iter += 1;
            if total_iter > budget {
                return false;
            }

            // Look for two consecutive small sub-diagonal elements.
            let mut m = n - 2;
            while m >= l {
                z = h![m, m];
                r = x - z;
                s = y - z;
                p = (r * s - w) / h![m + 1, m] + h![m, m + 1];
                q = h![m + 1, m + 1] - z - r - s;
                r = h![m + 2, m + 1];
                s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                if h![m, m - 1].abs() * (q.abs() + r.abs())
                    < eps * (p.abs() * (h![m - 1, m - 1].abs() + z.abs() + h![m + 1, m + 1].abs()))
                {
                    break;
                }
                m -= 1;
            }

            for i in (m + 2)..=n {
                h![i, i - 2] = 0.0;
                if i > m + 2 {
                    h![i, i - 3] = 0.0;
                }
            }

            // Double QR step on rows l..=n and columns m..=n.
            for k in m..n {
                let notlast = k != n - 1;
                if k != m {
                    p = h![k, k - 1];
                    q = h![k + 1, k - 1];
                    r = if notlast { h![k + 2, k - 1] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x == 0.0 {
                        continue;
                    }
                    p /= x;
                    q /= x;
                    r /= x;
                }

                s = (p * p + q * q + r * r).sqrt();
                if p < 0.0 {
                    s = -s;
                }
                if s != 0.0 {
                    if k != m {
                        h![k, k - 1] = -s * x;
                    } else if l != m {
                        h![k, k - 1] = -h![k, k - 1];
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;

                    for j in k..nn {
                        p = h![k, j] + q * h![k + 1, j];
                        if notlast {
                            p += r * h![k + 2, j];
                            h![k + 2, j] -= p * z;
                        }
                        h![k, j] -= p * x;
                        h![k + 1, j] -= p * y;
                    }
                    for i in 0..=n.min(k + 3) {
                        p = x * h![i, k] + y * h![i, k + 1];
                        if notlast {
                            p += z * h![i, k + 2];
                            h![i, k + 2] -= p * r;
                        }
                        h![i, k] -= p;
                        h![i, k + 1] -= p * q;
                    }
                    for i in low..=high {
                        p = x * v![i, k] + y * v![i, k + 1];
                        if notlast {
                            p += z * v![i, k + 2];
                            v![i, k + 2] -= p * r;
                        }
                        v![i, k] -= p;
                        v![i, k + 1] -= p * q;
                    }
                }
            }
        }
    }

    // Back-substitute to find vectors of the upper triangular form.
    if norm == 0.0 {
        return true;
    }
    let mut bn = nn - 1;
    while bn >= 0 {
        p = d[bn as usize];
        q = e[bn as usize];

        if q == 0.0 {
            // Real vector.
            let mut l = bn;
            h![bn, bn] = 1.0;
            let mut i = bn - 1;
            while i >= 0 {
                w = h![i, i] - p;
                r = 0.0;
                for j in l..=bn {
                    r += h![i, j] * h![j, bn];
                }
                if e[i as usize] < 0.0 {
                    z = w;
                    s = r;
                } else {
                    l = i;
                    if e[i as usize] == 0.0 {
                        if w != 0.0 {
                            h![i, bn] = -r / w;
                        } else {
                            h![i, bn] = -r / (eps * norm);
                        }
                    } else {
                        // Solve the real 2x2 pair equations.
                        x = h![i, i + 1];
                        y = h![i + 1, i];
                        q = (d[i as usize] - p) * (d[i as usize] - p)
                            + e[i as usize] * e[i as usize];
                        t = (x * s - z * r) / q;
                        h![i, bn] = t;
                        if x.abs() > z.abs() {
                            h![i + 1, bn] = (-r - w * t) / x;
                        } else {
                            h![i + 1, bn] = (-s - y * t) / z;
                        }
                    }

                    // Overflow control.
                    t = h![i, bn].abs();
                    if (eps * t) * t > 1.0 {
                        for j in i..=bn {
                            h![j, bn] /= t;
                        }
                    }
                }
                i -= 1;
            }
        } else if q < 0.0 {
            // Complex vector; the pair occupies columns bn-1 and bn.
            let mut l = bn - 1;

            if h![bn, bn - 1].abs() > h![bn - 1, bn].abs() {
                h![bn - 1, bn - 1] = q / h![bn, bn - 1];
                h![bn - 1, bn] = -(h![bn, bn] - p) / h![bn, bn - 1];
            } else {
                let (cr, ci) = cdiv(0.0, -h![bn - 1, bn], h![bn - 1, bn - 1] - p, q);
                h![bn - 1, bn - 1] = cr;
                h![bn - 1, bn] = ci;
            }
            h![bn, bn - 1] = 0.0;
            h![bn, bn] = 1.0;
            let mut i = bn - 2;
            while i >= 0 {
                let mut ra = 0.0;
                let mut sa = 0.0;
                for j in l..=bn {
                    ra += h![i, j] * h![j, bn - 1];
                    sa += h![i, j] * h![j, bn];
                }
                w = h![i, i] - p;

                if e[i as usize] < 0.0 {
                    z = w;
                    r = ra;
                    s = sa;
                } else {
                    l = i;
                    if e[i as usize] == 0.0 {
                        let (cr, ci) = cdiv(-ra, -sa, w, q);
                        h![i, bn - 1] = cr;
                        h![i, bn] = ci;
                    } else {
                        // Solve complex 2x2 pair equations.
                        x = h![i, i + 1];
                        y = h![i + 1, i];
                        let mut vr = (d[i as usize] - p) * (d[i as usize] - p)
                            + e[i as usize] * e[i as usize]
                            - q * q;
                        let vi = (d[i as usize] - p) * 2.0 * q;
                        if vr == 0.0 && vi == 0.0 {
                            vr = eps
                                * norm
                                * (w.abs() + q.abs() + x.abs() + y.abs() + z.abs());
                        }
                        let (cr, ci) =
                            cdiv(x * r - z * ra + q * sa, x * s - z * sa - q * ra, vr, vi);
                        h![i, bn - 1] = cr;
                        h![i, bn] = ci;
                        if x.abs() > z.abs() + q.abs() {
                            h![i + 1, bn - 1] =
                                (-ra - w * h![i, bn - 1] + q * h![i, bn]) / x;
                            h![i + 1, bn] = (-sa - w * h![i, bn] - q * h![i, bn - 1]) / x;
                        } else {
                            let (cr, ci) =
                                cdiv(-r - y * h![i, bn - 1], -s - y * h![i, bn], z, q);
                            h![i + 1, bn - 1] = cr;
                            h![i + 1, bn] = ci;
                        }
                    }

                    // Overflow control.
                    t = h![i, bn - 1].abs().max(h![i, bn].abs());
                    if (eps * t) * t > 1.0 {
                        for j in i..=bn {
                            h![j, bn - 1] /= t;
                            h![j, bn] /= t;
                        }
                    }
                }
                i -= 1;
            }
        }
        bn -= 1;
    }

    // Back-transform to eigenvectors of the original matrix.
    let mut j = nn - 1;
    while j >= low {
        for i in low..=high {
            z = 0.0;
            for k in low..=j.min(high) {
                z += v![i, k] * h![k, j];
            }
            v![i, j] = z;
        }
        j -= 1;
    }

    true
}
