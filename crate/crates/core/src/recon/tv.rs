//! Exact proximal operator of 1D total variation.
//!
//! Direct taut-string style algorithm (Condat, 2013): a single forward sweep
//! that keeps lower/upper bounds for the current segment value and emits a
//! segment as soon as a jump becomes unavoidable. Linear time in the common
//! case, no tolerances.

use crate::error::{invalid_config, Result};

/// `argmin_x 1/2 |x - v|^2 + weight * sum |x[s+1] - x[s]|`.
pub fn tv_prox_1d(v: &[f64], weight: f64) -> Result<Vec<f64>> {
    if !(weight >= 0.0) || !weight.is_finite() {
        return Err(invalid_config(format!("TV weight must be finite and >= 0, got {weight}")));
    }
    let mut out = vec![0.0; v.len()];
    tv_prox_1d_into(v, weight, &mut out);
    Ok(out)
}

/// In-place variant used by the denoisers; `weight` must already be valid.
pub(crate) fn tv_prox_1d_into(input: &[f64], lambda: f64, output: &mut [f64]) {
    let n = input.len();
    debug_assert_eq!(output.len(), n);
    if n == 0 {
        return;
    }
    if n == 1 || lambda == 0.0 {
        output.copy_from_slice(input);
        return;
    }

    let twolambda = 2.0 * lambda;
    let minlambda = -lambda;
    // k: current sample, k0: start of the open segment.
    let mut k = 0usize;
    let mut k0 = 0usize;
    // Last positions where umax hit -lambda and umin hit +lambda.
    let mut kplus = 0usize;
    let mut kminus = 0usize;
    let mut umin = lambda;
    let mut umax = minlambda;
    let mut vmin = input[0] - lambda;
    let mut vmax = input[0] + lambda;

    loop {
        while k == n - 1 {
            if umin < 0.0 {
                // segment value too high: negative jump
                loop {
                    output[k0] = vmin;
                    k0 += 1;
                    if k0 > kminus {
                        break;
                    }
                }
                k = k0;
                kminus = k0;
                vmin = input[k0];
                umin = lambda;
                umax = vmin + umin - vmax;
            } else if umax > 0.0 {
                // segment value too low: positive jump
                loop {
                    output[k0] = vmax;
                    k0 += 1;
                    if k0 > kplus {
                        break;
                    }
                }
                k = k0;
                kplus = k0;
                vmax = input[k0];
                umax = minlambda;
                umin = vmax + umax - vmin;
            } else {
                vmin += umin / (k - k0 + 1) as f64;
                loop {
                    output[k0] = vmin;
                    k0 += 1;
                    if k0 > k {
                        break;
                    }
                }
                return;
            }
        }

        umin += input[k + 1] - vmin;
        if umin < minlambda {
            loop {
                output[k0] = vmin;
                k0 += 1;
                if k0 > kminus {
                    break;
                }
            }
            k = k0;
            kplus = k0;
            kminus = k0;
            vmin = input[k0];
            vmax = vmin + twolambda;
            umin = lambda;
            umax = minlambda;
            continue;
        }
        umax += input[k + 1] - vmax;
        if umax > lambda {
            loop {
                output[k0] = vmax;
                k0 += 1;
                if k0 > kplus {
                    break;
                }
            }
            k = k0;
            kplus = k0;
            kminus = k0;
            vmax = input[k0];
            vmin = vmax - twolambda;
            umin = lambda;
            umax = minlambda;
            continue;
        }
        k += 1;
        if umin >= lambda {
            kminus = k;
            vmin += (umin - lambda) / (kminus - k0 + 1) as f64;
            umin = lambda;
        }
        if umax <= minlambda {
            kplus = k;
            vmax += (umax + lambda) / (kplus - k0 + 1) as f64;
            umax = minlambda;
        }
    }
}

/// `1/2 |x - v|^2 + weight * TV(x)`.
pub fn tv_objective(x: &[f64], v: &[f64], weight: f64) -> f64 {
    let fidelity: f64 = x.iter().zip(v).map(|(a, b)| 0.5 * (a - b).powi(2)).sum();
    fidelity + weight * total_variation(x)
}

pub fn total_variation(x: &[f64]) -> f64 {
    x.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}
