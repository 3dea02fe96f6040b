use ndarray::{Array2, ArrayView2};

/// Mean Huber loss over all elements and its gradient with respect to `pred`.
pub fn huber(pred: ArrayView2<f64>, target: ArrayView2<f64>, delta: f64) -> (f64, Array2<f64>) {
    huber_masked(pred, target, delta, None)
}

/// Mean squared error over all elements and its gradient with respect to `pred`.
pub fn mse(pred: ArrayView2<f64>, target: ArrayView2<f64>) -> (f64, Array2<f64>) {
    mse_masked(pred, target, None)
}

/// [`huber`] averaged over the rows with non-zero mask only.
pub fn huber_masked(pred: ArrayView2<f64>, target: ArrayView2<f64>, delta: f64, mask: Option<&[f64]>) -> (f64, Array2<f64>) {
    elementwise(pred, target, mask, |r| {
        let a = r.abs();
        if a <= delta {
            (0.5 * r * r, r)
        } else {
            (delta * (a - 0.5 * delta), delta * r.signum())
        }
    })
}

/// [`mse`] averaged over the rows with non-zero mask only.
pub fn mse_masked(pred: ArrayView2<f64>, target: ArrayView2<f64>, mask: Option<&[f64]>) -> (f64, Array2<f64>) {
    elementwise(pred, target, mask, |r| (r * r, 2.0 * r))
}

fn elementwise(
    pred: ArrayView2<f64>,
    target: ArrayView2<f64>,
    mask: Option<&[f64]>,
    f: impl Fn(f64) -> (f64, f64),
) -> (f64, Array2<f64>) {
    assert_eq!(pred.shape(), target.shape(), "prediction and target shapes differ");
    let cols = pred.ncols();
    let rows_used = match mask {
        Some(m) => {
            assert_eq!(m.len(), pred.nrows());
            m.iter().filter(|&&w| w != 0.0).count()
        }
        None => pred.nrows(),
    };
    let mut grad = Array2::zeros(pred.raw_dim());
    let count = (rows_used * cols) as f64;
    if count == 0.0 {
        return (0.0, grad);
    }
    let mut loss = 0.0;
    for (i, (p_row, t_row)) in pred.rows().into_iter().zip(target.rows()).enumerate() {
        if mask.is_some_and(|m| m[i] == 0.0) {
            continue;
        }
        for (j, (&p, &t)) in p_row.iter().zip(t_row.iter()).enumerate() {
            let (l, g) = f(p - t);
            loss += l;
            grad[[i, j]] = g / count;
        }
    }
    (loss / count, grad)
}
