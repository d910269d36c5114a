use rand::Rng;

use crate::nn::{ParamStore, Result};
use crate::scalar::Scalar;

/// He-uniform weights, `U(-sqrt(6 / fan_in), sqrt(6 / fan_in))`.
pub(crate) fn he_uniform<T: Scalar, R: Rng + ?Sized>(
    store: &mut ParamStore<T>,
    name: &str,
    shape: &[usize],
    fan_in: usize,
    rng: &mut R,
) -> Result<usize> {
    uniform(store, name, shape, (6.0 / fan_in as f64).sqrt(), rng)
}

pub(crate) fn uniform<T: Scalar, R: Rng + ?Sized>(
    store: &mut ParamStore<T>,
    name: &str,
    shape: &[usize],
    bound: f64,
    rng: &mut R,
) -> Result<usize> {
    let n = shape.iter().product();
    let data = (0..n).map(|_| T::lit(rng.random_range(-bound..=bound))).collect();
    store.insert(name, shape, data)
}

pub(crate) fn constant<T: Scalar>(
    store: &mut ParamStore<T>,
    name: &str,
    shape: &[usize],
    value: f64,
) -> Result<usize> {
    store.insert(name, shape, vec![T::lit(value); shape.iter().product()])
}
