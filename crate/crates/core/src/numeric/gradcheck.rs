//! Central-difference verification of reverse-mode gradients.

use crate::error::{Error, Result};
use crate::numeric::tape::{NodeId, Tape};
use crate::numeric::tensor::Tensor;

/// Compares the tape gradient of a scalar-valued graph against central finite
/// differences and returns the worst relative error over every input element:
/// `|analytic - fd| / max(1, |analytic|)`.
///
/// `build` must construct the same graph from whatever leaf values it is
/// handed; it is re-run at perturbed inputs for the differences.
pub fn finite_diff_check<F>(build: F, inputs: &[Tensor], h: f64) -> Result<f64>
where
    F: Fn(&mut Tape, &[NodeId]) -> Result<NodeId>,
{
    if !(1e-7..=1e-3).contains(&h) {
        return Err(Error::Config(format!(
            "finite-difference step {h} outside [1e-7, 1e-3]"
        )));
    }

    let eval = |tensors: &[Tensor]| -> Result<(Tape, Vec<NodeId>, NodeId)> {
        let mut tape = Tape::new();
        let ids = tensors
            .iter()
            .map(|t| tape.input(t.clone()))
            .collect::<Result<Vec<_>>>()?;
        let root = build(&mut tape, &ids)?;
        if !tape.value(root).is_scalar() {
            return Err(Error::Contract(
                "finite_diff_check requires a scalar-valued graph".to_string(),
            ));
        }
        Ok((tape, ids, root))
    };

    let (tape, ids, root) = eval(inputs)?;
    let grads = tape.backward(root)?;

    let mut max_err: f64 = 0.0;
    for (leaf, input) in inputs.iter().enumerate() {
        for e in 0..input.len() {
            let probe = |delta: f64| -> Result<f64> {
                let mut perturbed = inputs.to_vec();
                perturbed[leaf].data_mut()[e] += delta;
                let (t, _, r) = eval(&perturbed)?;
                Ok(t.value(r).data()[0])
            };
            let fd = (probe(h)? - probe(-h)?) / (2.0 * h);
            let analytic = grads.get(ids[leaf])[e];
            let err = (analytic - fd).abs() / analytic.abs().max(1.0);
            max_err = max_err.max(err);
        }
    }
    Ok(max_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::tensor;

    #[test]
    fn linear_graph_is_exact_under_central_differences() {
        let w = Tensor::matrix(1, 3, vec![0.3, -1.2, 2.0]).unwrap();
        let b = Tensor::vector(vec![0.5]);
        let x = Tensor::vector(vec![1.0, -2.0, 0.25]);
        let err = finite_diff_check(
            |tape, ids| {
                let y = tape.affine(ids[0], ids[2], ids[1])?;
                tape.sum(y)
            },
            &[w, b, x],
            1e-5,
        )
        .unwrap();
        assert!(err <= 1e-10, "linear graph error {err}");
    }

    #[test]
    fn relu_graph_away_from_kinks() {
        // Pre-activations are all at distance >= 0.4 from zero, far beyond h.
        let x = Tensor::vector(vec![0.4, -0.7, 1.3, -2.0]);
        let err = finite_diff_check(
            |tape, ids| {
                let r = tape.relu(ids[0])?;
                let l = tape.log_sum_exp(r)?;
                let two = tape.scale_const(l, 2.0)?;
                tape.sum(two)
            },
            &[x],
            1e-5,
        )
        .unwrap();
        assert!(err <= 1e-6, "relu graph error {err}");
    }

    #[test]
    fn softmax_family_matches_differences() {
        let q = Tensor::matrix(3, 2, vec![0.2, -0.4, 1.1, 0.0, -0.6, 0.9]).unwrap();
        let v = Tensor::vector(vec![0.3, -0.2, 0.15, 0.7, -0.9, 0.05]);
        let err = finite_diff_check(
            |tape, ids| {
                let g = tape.col_softmax(ids[0])?;
                let flat = tape.reshape(g, 6, 1)?;
                tape.dot(flat, ids[1])
            },
            &[q, v],
            1e-5,
        )
        .unwrap();
        assert!(err <= 1e-8, "col_softmax error {err}");
    }

    #[test]
    fn rejects_out_of_range_step() {
        let x = Tensor::scalar(1.0);
        assert!(finite_diff_check(|tape, ids| tape.sum(ids[0]), &[x], 1e-2).is_err());
    }

    #[test]
    fn matmul_and_module_affine_match_differences() {
        let g = tensor::row_softmax(&Tensor::matrix(2, 2, vec![0.3, -0.1, 0.8, 0.2]).unwrap());
        let o = Tensor::matrix(2, 3, vec![0.5, -0.2, 0.9, 1.1, 0.3, -0.7]).unwrap();
        let w0 = Tensor::matrix(2, 3, vec![0.11, -0.4, 0.2, 0.6, 0.05, -0.3]).unwrap();
        let w1 = Tensor::matrix(2, 3, vec![-0.2, 0.7, 0.4, 0.1, -0.5, 0.9]).unwrap();
        let b0 = Tensor::vector(vec![0.4, -0.6]);
        let b1 = Tensor::vector(vec![0.2, 0.3]);
        let err = finite_diff_check(
            |tape, ids| {
                let x = tape.matmul(ids[0], ids[1])?;
                let y = tape.module_affine(&[ids[2], ids[3]], &[ids[4], ids[5]], x)?;
                let r = tape.relu(y)?;
                let flat = tape.reshape(r, 4, 1)?;
                tape.log_sum_exp(flat)
            },
            &[g, o, w0, w1, b0, b1],
            1e-5,
        )
        .unwrap();
        assert!(err <= 1e-7, "module path error {err}");
    }
}
