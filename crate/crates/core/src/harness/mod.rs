//! Problem configuration, PGM datasets, reports and the command line.

pub mod cli;
pub mod config;
pub mod pgm;
pub mod report;
pub mod synth;

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::imaging::{BinaryImage, GrayImage};
use crate::metrics::{build_ground_truth, GroundTruth};

pub use cli::run_cli;
pub use config::ProblemConfig;
pub use report::emit_report;
pub use synth::{generate_synthetic_dataset, synthesize, SynthImage, SynthOptions};

/// One image of the environment together with its reference contours.
#[derive(Clone, Debug)]
pub struct DatasetEntry {
    pub id: String,
    pub image: GrayImage,
    pub gt: GroundTruth,
}

impl DatasetEntry {
    pub fn new(id: impl Into<String>, image: GrayImage, edges: BinaryImage) -> Result<Self> {
        let id = id.into();
        if image.width() != edges.width() || image.height() != edges.height() {
            return Err(Error::contract(format!(
                "{id}: image is {}x{} but ground truth is {}x{}",
                image.width(),
                image.height(),
                edges.width(),
                edges.height()
            )));
        }
        Ok(DatasetEntry {
            id,
            image,
            gt: build_ground_truth(edges),
        })
    }
}

/// In-memory dataset from synthetic images, bypassing the file system.
pub fn dataset_from_synth(images: Vec<SynthImage>) -> Result<Vec<DatasetEntry>> {
    images
        .into_iter()
        .map(|s| DatasetEntry::new(s.id, s.image, s.edges))
        .collect()
}

/// Loads every `<id>.pgm` / `<id>.gt.pgm` pair in `dir`, sorted by id.
pub fn load_dataset(dir: &Path) -> Result<Vec<DatasetEntry>> {
    let listing = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut images = Vec::new();
    let mut truths = Vec::new();
    for item in listing {
        let name = item.map_err(|e| Error::io(dir, e))?.file_name();
        let Some(name) = name.to_str() else { continue };
        if let Some(id) = name.strip_suffix(".gt.pgm") {
            truths.push(id.to_string());
        } else if let Some(id) = name.strip_suffix(".pgm") {
            images.push(id.to_string());
        }
    }
    images.sort();
    truths.sort();
    for id in &truths {
        if images.binary_search(id).is_err() {
            let path = dir.join(format!("{id}.pgm"));
            return Err(Error::Format {
                message: format!("missing image for ground truth {id}.gt.pgm"),
                path,
            });
        }
    }
    if images.is_empty() {
        return Err(Error::Format {
            path: dir.to_path_buf(),
            message: "no <id>.pgm / <id>.gt.pgm pairs found".into(),
        });
    }
    images
        .iter()
        .map(|id| {
            let img_path = dir.join(format!("{id}.pgm"));
            let gt_path = dir.join(format!("{id}.gt.pgm"));
            if truths.binary_search(id).is_err() {
                return Err(Error::Format {
                    path: gt_path,
                    message: format!("missing ground truth for {id}.pgm"),
                });
            }
            let img = pgm::read(&img_path)?;
            let gt = pgm::read(&gt_path)?;
            if (gt.width, gt.height) != (img.width, img.height) {
                return Err(Error::Format {
                    path: gt_path,
                    message: format!(
                        "ground truth is {}x{} but image is {}x{}",
                        gt.width, gt.height, img.width, img.height
                    ),
                });
            }
            let image = GrayImage::from_u8(img.width, img.height, &img.pixels)?;
            let edges = BinaryImage::new(
                gt.width,
                gt.height,
                gt.pixels.iter().map(|&p| p > 127).collect(),
            )?;
            DatasetEntry::new(id.clone(), image, edges)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_pair(dir: &Path, id: &str, w: usize, h: usize, gw: usize, gh: usize) {
        pgm::write(&dir.join(format!("{id}.pgm")), w, h, &vec![128; w * h]).unwrap();
        let mut gt = vec![0; gw * gh];
        gt[0] = 255;
        pgm::write(&dir.join(format!("{id}.gt.pgm")), gw, gh, &gt).unwrap();
    }

    #[test]
    fn three_pairs_sorted() {
        let dir = tempfile::tempdir().unwrap();
        for id in ["c", "a", "b"] {
            write_pair(dir.path(), id, 4, 3, 4, 3);
        }
        let ds = load_dataset(dir.path()).unwrap();
        let ids: Vec<_> = ds.iter().map(|e| e.id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
        assert_eq!(ds[0].gt.white_pixels, 1);
        assert!((ds[0].image.get(1, 1) - 128.0 / 255.0).abs() < 1e-12);
    }

    #[test]
    fn errors_name_the_file() {
        let dir = tempfile::tempdir().unwrap();
        write_pair(dir.path(), "a", 4, 3, 3, 4);
        let msg = load_dataset(dir.path()).unwrap_err().to_string();
        assert!(msg.contains("a.gt.pgm"), "{msg}");

        let dir = tempfile::tempdir().unwrap();
        write_pair(dir.path(), "a", 4, 3, 4, 3);
        pgm::write(&dir.path().join("b.pgm"), 2, 2, &[0; 4]).unwrap();
        let msg = load_dataset(dir.path()).unwrap_err().to_string();
        assert!(msg.contains("b.gt.pgm"), "{msg}");

        let dir = tempfile::tempdir().unwrap();
        write_pair(dir.path(), "a", 4, 3, 4, 3);
        fs::write(dir.path().join("a.pgm"), b"P5\n4 3\n65535\n").unwrap();
        let msg = load_dataset(dir.path()).unwrap_err().to_string();
        assert!(msg.contains("a.pgm") && msg.contains("maxval"), "{msg}");
    }

    #[test]
    fn synthetic_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let opts = SynthOptions {
            count: 3,
            size: 32,
            ..SynthOptions::default()
        };
        let files = generate_synthetic_dataset(&opts, dir.path()).unwrap();
        assert_eq!(files.len(), 6);
        let loaded = load_dataset(dir.path()).unwrap();
        for (l, s) in loaded.iter().zip(synthesize(&opts).unwrap()) {
            assert_eq!(l.id, s.id);
            assert_eq!(l.gt.edges, s.edges);
            for (a, b) in l.image.data().iter().zip(s.image.data()) {
                assert!((a - b).abs() <= 1.0 / 255.0);
            }
        }
    }
}
