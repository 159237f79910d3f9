//! Experiment generators, the convolution operator, images and metrics.

pub mod deconv;
pub mod experiments;
pub mod generators;
pub mod image;

pub use deconv::{
    blur, conv2_circular, frames_to_tensor, gaussian_kernel, image_to_tensor, kernel_to_tensor, tensor_to_frames,
    tensor_to_image, DeconvProblem,
};
pub use generators::{
    gen_checkerboard, gen_lowrank_tensor_problem, gen_sparse_problem, numerical_rank, synthetic_house,
    synthetic_sequence, truncate_tubal_rank, Checkerboard, MaskBox, SparseProblem, TensorProblem,
};
pub use image::{
    crop, pad_symmetric, psnr, read_pgm, relerr, relerr_values, ssim_global, write_pgm, Image, PgmFormat, PSNR_CAP,
};
