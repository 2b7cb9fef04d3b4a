pub mod eval;
pub mod fit;
pub mod mask;
pub mod mesh;
pub mod model;
pub mod synth;
