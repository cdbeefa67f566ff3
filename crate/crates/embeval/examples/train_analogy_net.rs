//! Train the analogy regression network on quads generated by a hidden
//! affine map. The untrained net reproduces 3CosAdd; training should
//! lower the held-out cost below that baseline.
//!
//! ```bash
//! cargo run -p embeval --example train_analogy_net
//! ```

use embeval::models::analogy_net::{fit_analogy_net, AnalogyNet, QuadVectors};
use embeval::models::{Optimizer, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn unit(mut v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= n);
    v
}

fn main() -> embeval::Result<()> {
    let dim = 10;
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    // hidden generator: v4 = normalize(A(-v1 + v2 + v3) + c)
    let a_map: Vec<f64> = (0..dim * dim).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let shift: Vec<f64> = (0..dim).map(|_| rng.gen_range(-0.2..0.2)).collect();
    let mut make_quad = |rng: &mut ChaCha8Rng| {
        let v1 = unit((0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let v2 = unit((0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let v3 = unit((0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let base: Vec<f64> = (0..dim).map(|i| -v1[i] + v2[i] + v3[i]).collect();
        let v4 = unit(
            (0..dim)
                .map(|i| shift[i] + (0..dim).map(|j| a_map[i * dim + j] * base[j]).sum::<f64>())
                .collect(),
        );
        QuadVectors { v1, v2, v3, v4 }
    };

    let train: Vec<QuadVectors> = (0..300).map(|_| make_quad(&mut rng)).collect();
    let held_out: Vec<QuadVectors> = (0..100).map(|_| make_quad(&mut rng)).collect();

    let baseline = AnalogyNet::untrained(dim);
    println!(
        "held-out mean cost at initialization (3CosAdd-equivalent): {:+.4}",
        baseline.mean_cost(&held_out)
    );

    for epochs in [5, 20, 80] {
        let config = TrainConfig {
            learning_rate: 0.05,
            epochs,
            optimizer: Optimizer::Momentum,
            batch_size: 32,
            fallback_to_constant: false,
        };
        let net = fit_analogy_net(&train, &config, 42)?;
        println!(
            "after {epochs:>2} epochs: held-out mean cost {:+.4}",
            net.mean_cost(&held_out)
        );
    }
    Ok(())
}
