/// Probabilities are clamped to `[BCE_EPS, 1 - BCE_EPS]` before taking logs.
pub const BCE_EPS: f64 = 1e-12;

/// Logistic function, evaluated without overflow for large `|z|`.
///
/// The lower tail is floored at the smallest normal `f64`, so the result is
/// strictly positive where `e^z` leaves the normal range (z below about -708).
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        (e / (1.0 + e)).max(f64::MIN_POSITIVE)
    }
}

/// Binary cross-entropy of one prediction.
pub fn bce_loss(y: u8, y_hat: f64) -> f64 {
    let p = y_hat.clamp(BCE_EPS, 1.0 - BCE_EPS);
    if y == 1 {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

pub fn relu(z: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        0.0
    }
}

/// Subgradient of ReLU; 0 at exactly 0.
pub fn relu_derivative(z: f64) -> f64 {
    if z > 0.0 {
        1.0
    } else {
        0.0
    }
}
