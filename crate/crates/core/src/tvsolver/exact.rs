//! Direct solvers for two structured cases: the path (taut string) and the
//! complete graph (order-preserving shift followed by isotonic regression).
//! Both minimize `1/2 |theta - y|^2 + mu TV(theta)`.

/// Exact 1D TV denoising with weight `mu` (taut-string style direct scan).
pub(crate) fn taut_string(y: &[f64], mu: f64) -> Vec<f64> {
    let n = y.len();
    let mut out = vec![0.0; n];
    if n == 0 {
        return out;
    }
    if mu <= 0.0 {
        out.copy_from_slice(y);
        return out;
    }
    let (mut k, mut k0, mut kplus, mut kminus) = (0usize, 0usize, 0usize, 0usize);
    let mut umin = mu;
    let mut umax = -mu;
    let mut vmin = y[0] - mu;
    let mut vmax = y[0] + mu;
    let last = n - 1;
    loop {
        while k == last {
            if umin < 0.0 {
                loop {
                    out[k0] = vmin;
                    k0 += 1;
                    if k0 > kminus {
                        break;
                    }
                }
                kminus = k0;
                k = k0;
                vmin = y[k0];
                umin = mu;
                umax = vmin + umin - vmax;
            } else if umax > 0.0 {
                loop {
                    out[k0] = vmax;
                    k0 += 1;
                    if k0 > kplus {
                        break;
                    }
                }
                kplus = k0;
                k = k0;
                vmax = y[k0];
                umax = -mu;
                umin = vmax + umax - vmin;
            } else {
                vmin += umin / (k - k0 + 1) as f64;
                while k0 <= k {
                    out[k0] = vmin;
                    k0 += 1;
                }
                return out;
            }
        }
        umin += y[k + 1] - vmin;
        if umin < -mu {
            loop {
                out[k0] = vmin;
                k0 += 1;
                if k0 > kminus {
                    break;
                }
            }
            k = k0;
            kplus = k0;
            kminus = k0;
            vmin = y[k0];
            vmax = vmin + 2.0 * mu;
            umin = mu;
            umax = -mu;
            continue;
        }
        umax += y[k + 1] - vmax;
        if umax > mu {
            loop {
                out[k0] = vmax;
                k0 += 1;
                if k0 > kplus {
                    break;
                }
            }
            k = k0;
            kplus = k0;
            kminus = k0;
            vmax = y[k0];
            vmin = vmax - 2.0 * mu;
            umin = mu;
            umax = -mu;
        } else {
            k += 1;
            if umin >= mu {
                kminus = k;
                vmin += (umin - mu) / (kminus - k0 + 1) as f64;
                umin = mu;
            }
            if umax <= -mu {
                kplus = k;
                vmax += (umax + mu) / (kplus - k0 + 1) as f64;
                umax = -mu;
            }
        }
    }
}

/// Exact solution on the complete graph. The minimizer preserves the order
/// of `y`, and on that cone the penalty is linear in the sorted values, so
/// the problem reduces to isotonic regression of shifted order statistics.
pub(crate) fn complete_graph(y: &[f64], mu: f64) -> Vec<f64> {
    let n = y.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| y[a].total_cmp(&y[b]));
    let target: Vec<f64> = order
        .iter()
        .enumerate()
        .map(|(k, &i)| y[i] - mu * (2.0 * (k + 1) as f64 - n as f64 - 1.0))
        .collect();
    let fitted = isotonic_increasing(&target);
    let mut out = vec![0.0; n];
    for (k, &i) in order.iter().enumerate() {
        out[i] = fitted[k];
    }
    out
}

/// Pool-adjacent-violators for a nondecreasing least-squares fit.
pub(crate) fn isotonic_increasing(w: &[f64]) -> Vec<f64> {
    // (sum, count) blocks
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(w.len());
    for &v in w {
        blocks.push((v, 1));
        while blocks.len() >= 2 {
            let (s1, c1) = blocks[blocks.len() - 1];
            let (s0, c0) = blocks[blocks.len() - 2];
            if s0 / c0 as f64 >= s1 / c1 as f64 {
                blocks.pop();
                let top = blocks.last_mut().expect("two blocks present");
                *top = (s0 + s1, c0 + c1);
            } else {
                break;
            }
        }
    }
    let mut out = Vec::with_capacity(w.len());
    for (s, c) in blocks {
        out.extend(std::iter::repeat_n(s / c as f64, c));
    }
    out
}
