mod common;

use common::{gradient_pairs, proxy_case, rel_err};
use snn_replay::lif::LifParams;
use snn_replay::matrix::Matrix;
use snn_replay::network::{network_forward, NetworkTopology};
use snn_replay::training::bptt::bptt_backward;
use snn_replay::training::loss::readout_loss;
use snn_replay::LifLayer;
use snn_replay::SpikeTrain;

#[test]
fn bptt_matches_finite_differences_on_proxy_networks() {
    let mut total = 0;
    let mut good = 0;
    for seed in 0..24 {
        let case = proxy_case(seed);
        for (a, n) in gradient_pairs(&case, 1.0, 1e-6) {
            total += 1;
            good += (rel_err(a, n) < 1e-3) as usize;
        }
    }
    assert!(good as f64 >= 0.95 * total as f64, "{good}/{total} within tolerance");
}

#[test]
fn frozen_prefix_gets_zero_gradient() {
    let case = proxy_case(3);
    let (_, grad, traces) = snn_replay::training::proxy::proxy_loss(&case.net, &case.input, case.timesteps, case.label, 1.0);
    let g = bptt_backward(&case.net, &traces, 1, &grad, 2).unwrap();
    assert!(g.dw[0].is_zero() && g.dv[0].is_zero());
}

#[test]
fn spiking_gradient_is_finite_and_flows_to_input_layer() {
    let w = Matrix::from_vec(2, 2, vec![0.8, 0.1, 0.3, 0.9]).unwrap();
    let l1 = LifLayer::new(w.clone(), Matrix::zeros(2, 2), LifParams::default(), true).unwrap();
    let l2 = LifLayer::new(w, Matrix::zeros(2, 2), LifParams::default(), true).unwrap();
    let net = NetworkTopology::new(vec![l1, l2]).unwrap();
    let input = SpikeTrain::from_vec(4, 2, vec![1, 0, 1, 1, 0, 1, 1, 1]).unwrap();
    let (out, traces) = network_forward(&net, &input, 1, None).unwrap();
    let report = readout_loss(&out, 1, 0.5).unwrap();
    let g = bptt_backward(&net, &traces, 1, &report.count_grad, 1).unwrap();
    assert!(g.is_finite());
    assert!(!g.dw[0].is_zero());
}

#[test]
fn rejects_traces_from_a_different_start() {
    let case = proxy_case(5);
    let (_, grad, traces) = snn_replay::training::proxy::proxy_loss(&case.net, &case.input, case.timesteps, case.label, 1.0);
    assert!(bptt_backward(&case.net, &traces[..traces.len() - 1], 1, &grad, 1).is_err());
}
