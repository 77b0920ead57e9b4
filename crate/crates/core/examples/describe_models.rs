//! Parameter tables of the four model variants.
//!
//! Run: `cargo run --release --example describe_models`

use vln::model::{ModelConfig, Variant, Vln};

fn main() -> vln::Result<()> {
    for v in Variant::ALL {
        let model = Vln::new(ModelConfig::preset(v), 0)?;
        println!("== {}", v.name());
        println!("{}", model.describe());
        let trace = model.trace_shapes(1)?;
        for l in 1..=model.levels() {
            if let Some(s) = trace.get(&format!("z{l}")) {
                println!("z{l} {s:?}");
            }
        }
        println!();
    }
    Ok(())
}
