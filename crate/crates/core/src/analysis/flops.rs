//! Per-layer operation counts. One multiply, add or comparison is one FLOP.

/// Dense same-padded convolution, bias excluded: `H W c_out (2 k^2 c_in - 1)`.
pub fn flops_dense_conv(h_out: usize, w_out: usize, c_in: usize, c_out: usize, k: usize) -> u64 {
    (h_out * w_out * c_out) as u64 * (2 * k * k * c_in).saturating_sub(1) as u64
}

/// Sparse or incremental convolution over `n_rules` rules: `N_r c_in (2 c_out + 1)`.
pub fn flops_sparse_conv(n_rules: u64, c_in: usize, c_out: usize) -> u64 {
    n_rules * (c_in * (2 * c_out + 1)) as u64
}

pub fn flops_dense_pool(h_out: usize, w_out: usize, c: usize, k: usize) -> u64 {
    (h_out * w_out * c * k * k) as u64
}

pub fn flops_sparse_pool(n_active: u64, c: usize, k: usize) -> u64 {
    n_active * (c * k * k) as u64
}

/// Fully connected layer, identical for dense and sparse inputs.
pub fn flops_fc(c_in: usize, c_out: usize) -> u64 {
    2 * (c_in * c_out) as u64
}

/// Incremental head update over `changed` input slots: one subtraction per slot
/// plus a multiply-add per output.
pub fn flops_fc_incremental(changed: u64, c_out: usize) -> u64 {
    changed * (2 * c_out + 1) as u64
}

pub fn flops_dense_relu(h_out: usize, w_out: usize, c: usize) -> u64 {
    (h_out * w_out * c) as u64
}

pub fn flops_sparse_relu(n_active: u64, c: usize) -> u64 {
    n_active * c as u64
}
