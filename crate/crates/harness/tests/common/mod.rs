#![allow(dead_code)]

use std::path::{Path, PathBuf};

use qrinit::mt19937::Mt19937;

fn idx(dims: &[u32], kind: u8, data: &[u8]) -> Vec<u8> {
    let mut out = vec![0, 0, 8, kind];
    for d in dims {
        out.extend(d.to_be_bytes());
    }
    out.extend(data);
    out
}

/// Writes small random MNIST-shaped IDX files whose labels depend on the image,
/// so models can learn something in a few epochs.
pub fn synthetic_mnist(dir: &Path, train: usize, test: usize) {
    std::fs::create_dir_all(dir).unwrap();
    let mut rng = Mt19937::new(99);
    for (prefix, rows) in [("train", train), ("t10k", test)] {
        let mut pixels = vec![0u8; rows * 784];
        let mut labels = Vec::with_capacity(rows);
        for r in 0..rows {
            let label = rng.next_below(10) as usize;
            labels.push(label as u8);
            for p in 0..784 {
                let on = p % 10 == label && rng.next_below(4) != 0;
                pixels[r * 784 + p] = if on { 128 + rng.next_below(128) as u8 } else { rng.next_below(16) as u8 };
            }
        }
        std::fs::write(dir.join(format!("{prefix}-images-idx3-ubyte")), idx(&[rows as u32, 28, 28], 3, &pixels)).unwrap();
        std::fs::write(dir.join(format!("{prefix}-labels-idx1-ubyte")), idx(&[rows as u32], 1, &labels)).unwrap();
    }
}

pub fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_qrinit"))
}
