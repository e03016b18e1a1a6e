pub mod linalg;
pub mod mvn;
pub mod quad;
pub mod special;
