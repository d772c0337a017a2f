//! Writes the toy intensity-sequence fixtures used by the configs in `configs/`.
//!
//! ```text
//! cargo run --example write_fixtures -- [DIR]
//! ```

use evsynth::toy::{write_class_fixture, write_skeleton_fixture};
use std::path::PathBuf;

fn main() -> evsynth::Result<()> {
    let root = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("fixtures"));
    let classes = write_class_fixture(root.join("toy_classes"), 60, 20, 16, 1)?;
    println!("toy_classes: {} sequences", classes.entries.len());
    let skeleton = write_skeleton_fixture(root.join("toy_skeleton"), 150, 30, 16, 2)?;
    println!("toy_skeleton: {} sequences", skeleton.entries.len());
    Ok(())
}
