//! Load an embedding table from the whitespace text format, normalize it,
//! and run lookups plus the nearest-neighbor scan.
//!
//! ```bash
//! cargo run -p embeval --example load_and_query
//! ```

use std::io::Write;

use embeval::embedding::{intersect_vocabularies, load_embeddings};

fn main() -> embeval::Result<()> {
    // a small GloVe-style text file; the "count dim" header is optional
    let mut file = tempfile::NamedTempFile::new().expect("temp file");
    write!(
        file,
        "5 3\n\
         King 0.9 0.8 0.1\n\
         queen 0.8 0.9 0.1\n\
         man 0.9 0.2 0.0\n\
         woman 0.8 0.3 0.0\n\
         apple 0.0 0.1 0.9\n"
    )
    .expect("write");

    let table = load_embeddings(file.path())?.normalized()?;
    println!("loaded {} words at dimension {}", table.len(), table.dim());

    // lookups lowercase their query; absent words return None
    println!("KING -> {:?}", table.lookup("KING").map(<[f64]>::to_vec));
    println!("zebra in vocabulary: {}", table.contains("zebra"));

    // nearest neighbor by inner product over the whole vocabulary
    let query = table.lookup("queen").unwrap().to_vec();
    let nearest = table.argmax_inner_product(&query, &["queen"])?;
    println!("nearest to queen (excluding itself): {nearest}");

    // intersecting vocabularies puts every table in one shared order
    let second = load_embeddings(file.path())?;
    let intersected = intersect_vocabularies(vec![table.clone(), second])?;
    println!(
        "shared vocabulary, lexicographic: {:?}",
        intersected[0].vocab()
    );
    Ok(())
}
