//! Files in and out of the pipeline, plus molecules to feed it.
//!
//! XYZ text is the molecule format; grids use a small little-endian binary
//! format described in [`write_grid`]. [`templates`] holds hand-checked small
//! molecules and [`synth_molecules`] draws random ones for desk-scale runs.

mod gridfile;
mod synth;
pub mod templates;
mod xyz;

pub use gridfile::{decode_grid, encode_grid, read_grid, write_grid, GRID_HEADER_LEN, GRID_MAGIC, GRID_VERSION};
pub use synth::{synth_molecules, SynthConstraints};
pub use xyz::{parse_xyz, read_xyz, read_xyz_dir, write_xyz, write_xyz_file};
