pub mod autodiff;
pub mod casem;
pub mod data;
pub mod experiments;
pub mod layers;
pub mod tensor;

