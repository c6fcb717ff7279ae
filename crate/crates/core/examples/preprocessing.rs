//! Loads a CSV with its schema, regroups rare categories, encodes levels and
//! quantile-transforms numerical columns.
//!
//! cargo run --example preprocessing -- [data.csv data.schema]

use std::path::PathBuf;

use pmae::data::{load_dataset, preprocess, regroup_threshold};

fn main() -> pmae::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let here = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/data");
    let (csv, schema) = match args.as_slice() {
        [c, s] => (PathBuf::from(c), PathBuf::from(s)),
        _ => (here.join("people.csv"), here.join("people.schema")),
    };
    let raw = load_dataset(&csv, &schema)?;
    println!(
        "{} rows × {} columns, regroup threshold {}",
        raw.n_rows(),
        raw.n_cols(),
        regroup_threshold(raw.n_rows())
    );
    let ds = preprocess(&raw)?;
    for (j, col) in ds.schema.iter().enumerate() {
        match &ds.level_maps[j] {
            Some(levels) => println!("{:>10}  categorical  levels {levels:?}", col.name),
            None => println!("{:>10}  numerical    quantile-mapped", col.name),
        }
    }
    println!();
    ds.write_csv(std::io::stdout().lock())
}
