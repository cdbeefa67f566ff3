//! Solve analogies with the constant models 3CosAdd and 3CosMul on a tiny
//! vocabulary with a planted parallelogram structure.
//!
//! ```bash
//! cargo run -p embeval --example analogy_solvers
//! ```

use embeval::embedding::EmbeddingTable;
use embeval::models::constant::{predict_3cosadd, predict_3cosmul, DEFAULT_EPSILON};

fn main() -> embeval::Result<()> {
    // gender direction on axis 0, royalty on axis 1, plus filler words
    let entries: Vec<(&str, Vec<f64>)> = vec![
        ("king", vec![0.9, 0.9, 0.05]),
        ("queen", vec![0.1, 0.9, 0.05]),
        ("man", vec![0.9, 0.1, 0.05]),
        ("woman", vec![0.1, 0.1, 0.05]),
        ("banana", vec![0.4, 0.0, 0.95]),
        ("plum", vec![0.5, 0.1, 0.90]),
    ];
    let table = EmbeddingTable::from_rows(
        entries.iter().map(|(t, _)| t.to_string()).collect(),
        entries.iter().map(|(_, v)| v.clone()).collect(),
    )?
    .normalized()?;

    for (w1, w2, w3) in [("king", "queen", "man"), ("man", "king", "woman")] {
        let add = predict_3cosadd(&table, (w1, w2, w3), true)?;
        let mul = predict_3cosmul(&table, (w1, w2, w3), DEFAULT_EPSILON, true)?;
        println!("{w1} : {w2} = {w3} : ?   3CosAdd -> {add}, 3CosMul -> {mul}");
    }

    // question words can stay in the candidate pool
    let with_inputs = predict_3cosadd(&table, ("king", "king", "plum"), false)?;
    println!("degenerate direction king - king + plum -> {with_inputs}");
    Ok(())
}
