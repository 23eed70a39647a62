use crate::agent::ModelParams;
use crate::error::{Error, Result};

pub(crate) fn check_dims(params: &[&ModelParams]) -> Result<()> {
    let first = params.first().ok_or(Error::Empty("uploads"))?;
    for p in params {
        if p.architecture() != first.architecture() {
            return Err(Error::DimensionMismatch { expected: first.len(), actual: p.len() });
        }
    }
    Ok(())
}

/// Element-wise unweighted mean of `uploads`.
pub fn fedavg_aggregate(uploads: &[&ModelParams]) -> Result<ModelParams> {
    check_dims(uploads)?;
    let n = uploads.len() as f64;
    let mut sum = vec![0.0; uploads[0].len()];
    for p in uploads {
        for (s, v) in sum.iter_mut().zip(p.as_slice()) {
            *s += v;
        }
    }
    sum.iter_mut().for_each(|s| *s /= n);
    uploads[0].unflatten(sum)
}
