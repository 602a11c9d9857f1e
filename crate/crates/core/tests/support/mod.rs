pub mod naive_nca;
