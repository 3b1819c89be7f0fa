pub mod hull;
pub mod level;
pub mod optimize;
pub mod quadrature;
pub mod roots;
