use super::mlp::{GradSet, LayerGrad, Mlp};
use super::Matrix;
use crate::error::{shape_err, Error, Result};
use crate::rng::RngStream;

/// Added under the square root of each row's gradient norm so the penalty
/// stays differentiable where the critic gradient vanishes.
pub const NORM_GUARD: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct PenaltyOutput {
    pub penalty: f64,
    /// Gradient of the penalty with respect to the critic parameters.
    pub grads: GradSet,
    /// Gradient of the penalty with respect to the interpolated inputs.
    pub input_grad: Matrix,
    /// Per-row critic gradient norms.
    pub norms: Vec<f64>,
}

/// `λ · mean_r (‖∇ₓ D(x̂_r)‖ − 1)²` and its exact derivatives.
///
/// The critic must have a single output column. Parameter gradients are
/// obtained by differentiating the input-gradient reverse pass.
pub fn gradient_penalty(disc: &Mlp, x_hat: &Matrix, lambda_gp: f64) -> Result<PenaltyOutput> {
    if !(lambda_gp >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "gradient-penalty weight must be non-negative, got {lambda_gp}"
        )));
    }
    if disc.output_width() != 1 {
        return Err(shape_err(
            "gradient_penalty critic output",
            1,
            disc.output_width(),
        ));
    }
    let (_, tape) = disc.forward(x_hat)?;
    let layers = disc.layers();
    let n_layers = layers.len();
    let rows = x_hat.rows();

    // Reverse pass: deltas[l] is dD/dh_l (h_0 = input), phi_d[l] = φ'(a_l),
    // e[l] = deltas[l+1] ⊙ phi_d[l].
    let mut deltas = vec![Matrix::zeros(0, 0); n_layers + 1];
    let mut phi_d = vec![Matrix::zeros(0, 0); n_layers];
    let mut e = vec![Matrix::zeros(0, 0); n_layers];
    deltas[n_layers] = Matrix::filled(rows, 1, 1.0);
    for l in (0..n_layers).rev() {
        let act = layers[l].activation;
        phi_d[l] = tape.pre[l].zip_map(&tape.post[l], |a, h| act.derivative(a, h))?;
        e[l] = phi_d[l].zip_map(&deltas[l + 1], |p, d| p * d)?;
        deltas[l] = e[l].matmul_t(&layers[l].weight)?;
    }
    let g = &deltas[0];

    let inv_b = if rows == 0 { 0.0 } else { 1.0 / rows as f64 };
    let mut penalty = 0.0;
    let mut norms = Vec::with_capacity(rows);
    let mut g_bar = Matrix::zeros(rows, g.cols());
    for r in 0..rows {
        let norm = (g.row(r).iter().map(|v| v * v).sum::<f64>() + NORM_GUARD).sqrt();
        penalty += (norm - 1.0).powi(2);
        let k = lambda_gp * inv_b * 2.0 * (norm - 1.0) / norm;
        for (o, v) in g_bar.row_mut(r).iter_mut().zip(g.row(r)) {
            *o = k * v;
        }
        norms.push(norm);
    }
    penalty *= lambda_gp * inv_b;

    let mut grads = GradSet::zeros_like(disc);
    // Adjoint of the reverse pass, walking forward through the layers.
    // a_bar[l] collects direct sensitivities of the penalty to a_l.
    let mut a_bar: Vec<Matrix> = Vec::with_capacity(n_layers);
    let mut delta_bar = g_bar;
    for l in 0..n_layers {
        let act = layers[l].activation;
        let e_bar = delta_bar.matmul(&layers[l].weight)?;
        grads.layers[l].weight = delta_bar.t_matmul(&e[l])?;
        if act.is_piecewise_linear() {
            a_bar.push(Matrix::zeros(rows, e_bar.cols()));
        } else {
            let curv = tape.post[l].map(|h| act.second_derivative(h));
            let ab = e_bar
                .zip_map(&deltas[l + 1], |x, d| x * d)?
                .zip_map(&curv, |x, c| x * c)?;
            a_bar.push(ab);
        }
        delta_bar = e_bar.zip_map(&phi_d[l], |x, p| x * p)?;
    }

    // Ordinary backward of the forward pass with a_bar injected at each layer.
    let mut h_bar = Matrix::zeros(rows, 1);
    for l in (0..n_layers).rev() {
        let mut total = h_bar.zip_map(&phi_d[l], |x, p| x * p)?;
        total.add_assign(&a_bar[l])?;
        let LayerGrad { weight, bias } = &mut grads.layers[l];
        weight.add_assign(&tape.inputs[l].t_matmul(&total)?)?;
        *bias = total.column_sums();
        h_bar = total.matmul_t(&layers[l].weight)?;
    }

    Ok(PenaltyOutput {
        penalty,
        grads,
        input_grad: h_bar,
        norms,
    })
}

/// Per-row interpolation weights `β_r ∈ [0, 1)`.
pub fn draw_betas(rows: usize, rng: &mut RngStream) -> Vec<f64> {
    rng.uniform_vec(rows)
}

/// Row-wise `β_r x_r + (1 − β_r) x̃_r`.
pub fn interpolate_with(x: &Matrix, x_tilde: &Matrix, betas: &[f64]) -> Result<Matrix> {
    x.check_same_shape(x_tilde, "interpolate")?;
    if betas.len() != x.rows() {
        return Err(shape_err("interpolate weights", x.rows(), betas.len()));
    }
    let mut out = x.clone();
    for (r, &b) in betas.iter().enumerate() {
        for (o, t) in out.row_mut(r).iter_mut().zip(x_tilde.row(r)) {
            *o = b * *o + (1.0 - b) * t;
        }
    }
    Ok(out)
}

pub fn interpolate(x: &Matrix, x_tilde: &Matrix, rng: &mut RngStream) -> Result<Matrix> {
    x.check_same_shape(x_tilde, "interpolate")?;
    let betas = draw_betas(x.rows(), rng);
    interpolate_with(x, x_tilde, &betas)
}
