//! Average rates of a fixed design over the channel-estimation error.

use rand::Rng;

use crate::channel::{apply_csi_error, ChannelSet, CsiErrorModel};
use crate::error::{Error, Result};
use crate::rates::{evaluate, Precoder, RateResult};
use crate::ris::{effective_channels, RisMatrix};
use crate::scalar::Real;

fn accumulate<T: Real>(acc: &mut [T], v: &[T]) {
    for (a, x) in acc.iter_mut().zip(v) {
        *a += *x;
    }
}

fn min_of<T: Real>(v: impl Iterator<Item = T>) -> T {
    v.fold(T::max_value().unwrap(), |a, b| a.min(b))
}

/// Per-stream rates averaged over `n_samples` channels `estimate + error`.
/// Common rates are the minimum over users of the *averaged* per-user
/// common rates. The result carries no allocation.
pub fn ergodic_rates<T: Real, R: Rng + ?Sized>(
    pre: &Precoder<T>,
    ris: &RisMatrix<T>,
    estimate: &ChannelSet<T>,
    err: &CsiErrorModel<T>,
    noise: T,
    n_samples: usize,
    rng: &mut R,
) -> Result<RateResult<T>> {
    if n_samples == 0 {
        return Err(Error::invalid("n_samples must be >= 1"));
    }
    let mut sum: Option<RateResult<T>> = None;
    for _ in 0..n_samples {
        let truth = apply_csi_error(estimate, err, rng);
        let r = evaluate(&effective_channels(&truth, ris)?, pre, noise)?;
        match sum.as_mut() {
            None => sum = Some(r),
            Some(s) => {
                accumulate(&mut s.common_per_user, &r.common_per_user);
                accumulate(&mut s.inner_per_user, &r.inner_per_user);
                accumulate(&mut s.private_rates, &r.private_rates);
            }
        }
    }
    let mut avg = sum.expect("at least one sample");
    let n = T::from_usize(n_samples).unwrap();
    for v in avg
        .common_per_user
        .iter_mut()
        .chain(avg.inner_per_user.iter_mut())
        .chain(avg.private_rates.iter_mut())
    {
        *v /= n;
    }
    avg.common_rate = if avg.common_per_user.is_empty() {
        T::zero()
    } else {
        min_of(avg.common_per_user.iter().copied())
    };
    avg.inner_common_rates = avg
        .groups
        .iter()
        .map(|g| min_of(g.iter().map(|&k| avg.inner_per_user[k])))
        .collect();
    let k = avg.users();
    avg.common_alloc = vec![T::zero(); k];
    avg.inner_alloc = vec![T::zero(); k];
    avg.user_totals = avg.private_rates.clone();
    Ok(avg)
}
