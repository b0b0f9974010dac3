use std::io::Write;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use spectral_nns::ingest::{self, PreprocessParams, RawDataset};
use spectral_nns::linalg::DataMatrix;
use spectral_nns::model::{check_invariants, verify_gap};
use spectral_nns::Error;

/// Points near a 6-dimensional subspace of R^30 plus a little isotropic spread.
fn clustered(m: usize, seed: u64) -> RawDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = |r, c| DMatrix::<f64>::from_fn(r, c, |_, _| StandardNormal.sample(&mut rng));
    let v = g(30, 6) * g(6, m) + g(30, m) * 0.05;
    RawDataset {
        name: "clustered".into(),
        vectors: DataMatrix::new(v).unwrap(),
        labels: None,
    }
}

#[test]
fn held_out_queries_become_valid_instances() {
    let raw = clustered(600, 1);
    let params = PreprocessParams::new(100, 6, 0.05, 4);
    let insts = ingest::preprocess(&raw, &params, 11).unwrap();
    assert_eq!(insts.len(), 4);
    for inst in &insts {
        assert_eq!((inst.n(), inst.d(), inst.k()), (100, 30, 6));
        assert!(verify_gap(inst));
        check_invariants(inst).unwrap();
        let d = inst.distances();
        let second = d
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != inst.nn_index())
            .map(|(_, &x)| x)
            .fold(f64::INFINITY, f64::min);
        assert!(second <= 1.05 * 1.05 + 1e-9, "ratio {second} outside the selection window");
    }
    assert_eq!(insts, ingest::preprocess(&raw, &params, 11).unwrap());
}

#[test]
fn separate_query_pool() {
    let raw = clustered(300, 2);
    let queries = clustered(400, 3);
    let params = PreprocessParams::new(100, 6, 0.05, 2);
    let insts = ingest::preprocess_with_queries(&raw, &queries, &params, 5).unwrap();
    assert_eq!(insts.len(), 2);
    assert!(insts.iter().all(verify_gap));
}

#[test]
fn too_few_eligible_queries_is_an_ingestion_error() {
    let raw = clustered(150, 4);
    let params = PreprocessParams::new(100, 6, 0.05, 500);
    match ingest::preprocess(&raw, &params, 1) {
        Err(Error::Ingestion(msg)) => assert!(msg.contains("of 500"), "{msg}"),
        other => panic!("expected ingestion error, got {other:?}"),
    }
}

#[test]
fn invalid_parameters_are_rejected() {
    let raw = clustered(200, 5);
    assert!(ingest::preprocess(&raw, &PreprocessParams::new(101, 6, 0.05, 1), 0).unwrap_err().is_parameter());
    assert!(ingest::preprocess(&raw, &PreprocessParams::new(100, 0, 0.05, 1), 0).unwrap_err().is_parameter());
    assert!(ingest::preprocess(&raw, &PreprocessParams::new(100, 6, 0.0, 1), 0).unwrap_err().is_parameter());
}

#[test]
fn glove_file_with_line_numbered_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("glove.txt");
    let mut f = std::fs::File::create(&path).unwrap();
    writeln!(f, "king 0.5 -0.25 1e-3").unwrap();
    writeln!(f).unwrap();
    writeln!(f, "queen 0.4 -0.2 0.002").unwrap();
    writeln!(f, "rook 0.1 nan? 0.3").unwrap();
    drop(f);
    match ingest::load_glove(&path) {
        Err(e @ Error::FormatAt { line: 4, .. }) => assert!(e.to_string().contains("line 4")),
        other => panic!("unexpected {other:?}"),
    }
    std::fs::write(&path, "king 0.5 -0.25 1e-3\n\nqueen 0.4 -0.2 0.002\n").unwrap();
    let ds = ingest::load_glove(&path).unwrap();
    assert_eq!(ds.len(), 2);
    assert_eq!(ds.vectors.get(2, 0), 1e-3);
}

#[test]
fn mnist_file_through_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let count = 400u32;
    let mut bytes = Vec::new();
    for v in [0x0000_0803u32, count, 28, 28] {
        bytes.extend_from_slice(&v.to_be_bytes());
    }
    // blurry low-rank images: a few prototypes mixed with random weights
    let protos: Vec<Vec<f64>> = (0..5)
        .map(|_| (0..784).map(|_| rand::Rng::random::<f64>(&mut rng)).collect())
        .collect();
    for _ in 0..count {
        let w: Vec<f64> = (0..5).map(|_| rand::Rng::random::<f64>(&mut rng)).collect();
        let total: f64 = w.iter().sum();
        for p in 0..784 {
            let v: f64 = (0..5).map(|i| w[i] * protos[i][p]).sum::<f64>() / total;
            bytes.push((v * 255.0).round() as u8);
        }
    }
    std::fs::write(dir.path().join("train-images-idx3-ubyte"), &bytes).unwrap();
    let ds = ingest::load_mnist_idx(dir.path().join("train-images-idx3-ubyte"), Some(300)).unwrap();
    assert_eq!((ds.dim(), ds.len()), (784, 300));
    assert!(ds.vectors.as_matrix().iter().all(|&x| (0.0..=1.0).contains(&x)));

    let o = std::process::Command::new(env!("CARGO_BIN_EXE_spectral-nns"))
        .current_dir(dir.path())
        .args([
            "ingest", "train-images-idx3-ubyte", "--format", "mnist", "--n", "100", "--k", "5", "--eps", "0.05",
            "--count", "2", "--seed", "4", "--out-dir", "out",
        ])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for i in 1..=2 {
        let f = spectral_nns::container::load(dir.path().join(format!("out/query-{i:04}.snns"))).unwrap();
        assert!(verify_gap(&f.latent));
        assert_eq!(f.latent.d(), 784);
    }
}
