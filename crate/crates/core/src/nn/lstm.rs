use super::{Graph, Result, Var};
use crate::scalar::Scalar;

/// Graph handles for one LSTM cell. Each gate matrix is `[H, H + I]` and
/// multiplies the concatenation `[h_prev, x_t]`.
#[derive(Debug, Clone, Copy)]
pub struct LstmVars {
    pub w_f: Var,
    pub w_i: Var,
    pub w_c: Var,
    pub w_o: Var,
    pub b_f: Var,
    pub b_i: Var,
    pub b_c: Var,
    pub b_o: Var,
}

/// One LSTM step, returning `(h_t, c_t)`:
///
/// ```text
/// f = σ(W_f [h, x] + b_f)      i = σ(W_i [h, x] + b_i)
/// c̃ = tanh(W_C [h, x] + b_C)   c_t = f * c_prev + i * c̃
/// h_t = σ(W_o [h, x] + b_o) * tanh(c_t)
/// ```
pub fn lstm_step<T: Scalar>(
    g: &mut Graph<T>,
    p: &LstmVars,
    x: Var,
    h_prev: Var,
    c_prev: Var,
) -> Result<(Var, Var)> {
    let hx = g.concat(&[h_prev, x])?;
    let f = g.fully_connected(hx, p.w_f, p.b_f)?;
    let f = g.sigmoid(f);
    let i = g.fully_connected(hx, p.w_i, p.b_i)?;
    let i = g.sigmoid(i);
    let cand = g.fully_connected(hx, p.w_c, p.b_c)?;
    let cand = g.tanh(cand);
    let o = g.fully_connected(hx, p.w_o, p.b_o)?;
    let o = g.sigmoid(o);
    let keep = g.mul(f, c_prev)?;
    let write = g.mul(i, cand)?;
    let c = g.add(keep, write)?;
    let squashed = g.tanh(c);
    let h = g.mul(o, squashed)?;
    Ok((h, c))
}
