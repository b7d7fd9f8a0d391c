//! Connected-component labelling and small-object removal.

use std::collections::VecDeque;

use super::{BinaryImage, Connectivity};

/// Label map of a binary image. Background pixels carry label 0; component
/// `k` (1-based) has `sizes[k - 1]` pixels. Labels follow raster order of
/// each component's first pixel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Components {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<u32>,
    pub sizes: Vec<usize>,
}

impl Components {
    pub fn count(&self) -> usize {
        self.sizes.len()
    }

    pub fn largest(&self) -> usize {
        self.sizes.iter().copied().max().unwrap_or(0)
    }
}

pub fn connected_components(bin: &BinaryImage, conn: Connectivity) -> Components {
    let (w, h) = (bin.width(), bin.height());
    let mut labels = vec![0u32; w * h];
    let mut sizes = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if !bin.data()[start] || labels[start] != 0 {
            continue;
        }
        let label = sizes.len() as u32 + 1;
        labels[start] = label;
        queue.push_back(start);
        let mut size = 0;
        while let Some(i) = queue.pop_front() {
            size += 1;
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            for &(dx, dy) in conn.offsets() {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if bin.data()[j] && labels[j] == 0 {
                    labels[j] = label;
                    queue.push_back(j);
                }
            }
        }
        sizes.push(size);
    }
    Components {
        width: w,
        height: h,
        labels,
        sizes,
    }
}

/// Drops every component with fewer than `min_size` pixels.
pub fn remove_small_objects(bin: &BinaryImage, min_size: usize, conn: Connectivity) -> BinaryImage {
    if min_size == 0 {
        return bin.clone();
    }
    let cc = connected_components(bin, conn);
    let data = cc
        .labels
        .iter()
        .map(|&l| l != 0 && cc.sizes[l as usize - 1] >= min_size)
        .collect();
    BinaryImage::new(bin.width(), bin.height(), data).expect("same dimensions")
}
