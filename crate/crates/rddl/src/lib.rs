pub mod algebra;
pub mod arith;
pub mod corpus;
pub mod kernel;
pub mod semantics;
pub mod syntax;
