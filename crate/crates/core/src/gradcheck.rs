//! Central finite differences, used as the oracle for reverse-mode gradients.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::Result;
use crate::graph::Graph;
use crate::model::SharpNet;
use crate::tensor::Tensor;

/// `(f(x + h·eᵢ) − f(x − h·eᵢ)) / 2h` for every element `i` of `x`.
pub fn finite_difference_grad(mut f: impl FnMut(&Tensor) -> f64, x: &Tensor, h: f64) -> Tensor {
    let mut probe = x.clone();
    let mut grad = Tensor::zeros(x.shape());
    for i in 0..x.len() {
        let orig = x.data()[i];
        probe.data_mut()[i] = orig + h;
        let plus = f(&probe);
        probe.data_mut()[i] = orig - h;
        let minus = f(&probe);
        probe.data_mut()[i] = orig;
        grad.data_mut()[i] = (plus - minus) / (2.0 * h);
    }
    grad
}

/// `‖a − b‖₂ / max(‖a‖₂, ‖b‖₂)`, or 0 when both are exactly zero.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let mut diff = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        diff += (x - y) * (x - y);
        na += x * x;
        nb += y * y;
    }
    let denom = libm::sqrt(na.max(nb));
    if denom == 0.0 {
        0.0
    } else {
        libm::sqrt(diff) / denom
    }
}

/// Outcome of checking one named parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamCheck {
    pub name: String,
    pub entries: usize,
    pub rel_error: f64,
    /// Entries whose ±h probe switched a ReLU or max-pool branch and were
    /// re-probed with a smaller step.
    pub restepped: usize,
    /// Entries that still switched a branch at the smallest step.
    pub unresolved: usize,
}

/// Smallest step tried when a probe straddles a kink, relative to `h`.
const MIN_STEP_RATIO: f64 = 1e-4;

/// Compares every parameter's reverse-mode gradient with central
/// differences of the loss at step `h`. A probe pair that lands on a
/// different branch of a ReLU or max-pool than the unperturbed pass is not a
/// derivative of the local piece, so that entry is re-probed at h/10,
/// h/100, ... until both sides stay on the same branch.
pub fn check_model_gradients(
    net: &mut SharpNet,
    image: &Tensor,
    bank: Option<&Tensor>,
    targets: &Tensor,
    h: f64,
) -> Result<Vec<ParamCheck>> {
    let (_, grads) = net.loss_and_grads(image, bank, targets)?;
    let (base, _, _) = net.loss_graph(image, bank, targets, false)?;
    let names = net.params().names().to_vec();
    let mut report = Vec::with_capacity(names.len());
    for (pi, name) in names.into_iter().enumerate() {
        let len = grads[pi].len();
        let mut fd = Vec::with_capacity(len);
        let (mut restepped, mut unresolved) = (0, 0);
        for j in 0..len {
            let mut step = h;
            let (mut estimate, mut smooth) = probe(net, &base, image, bank, targets, pi, j, step)?;
            if !smooth {
                restepped += 1;
                while !smooth && step > h * MIN_STEP_RATIO * 1.5 {
                    step /= 10.0;
                    (estimate, smooth) = probe(net, &base, image, bank, targets, pi, j, step)?;
                }
                if !smooth {
                    unresolved += 1;
                }
            }
            fd.push(estimate);
        }
        report.push(ParamCheck {
            name,
            entries: len,
            rel_error: relative_error(grads[pi].data(), &fd),
            restepped,
            unresolved,
        });
    }
    Ok(report)
}

#[allow(clippy::too_many_arguments)]
fn probe(
    net: &mut SharpNet,
    base: &Graph,
    image: &Tensor,
    bank: Option<&Tensor>,
    targets: &Tensor,
    param: usize,
    index: usize,
    step: f64,
) -> Result<(f64, bool)> {
    let orig = net.params().tensors()[param].data()[index];
    let eval = |value: f64, net: &mut SharpNet| -> Result<(f64, bool)> {
        net.params_mut().tensors_mut()[param].data_mut()[index] = value;
        let (g, _, loss) = net.loss_graph(image, bank, targets, false)?;
        Ok((g.value(loss).data()[0], g.same_branches(base)))
    };
    let plus = eval(orig + step, net);
    let minus = eval(orig - step, net);
    net.params_mut().tensors_mut()[param].data_mut()[index] = orig;
    let ((lp, sp), (lm, sm)) = (plus?, minus?);
    Ok(((lp - lm) / (2.0 * step), sp && sm))
}
