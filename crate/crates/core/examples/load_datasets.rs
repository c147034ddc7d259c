//! Reading CSV and IDX files.

use autoclip::experiments::{encode_idx, load_dataset, DataFormat};

fn main() -> autoclip::Result<()> {
    let dir = tempfile::tempdir().map_err(|e| autoclip::Error::Io { path: ".".into(), source: e })?;
    let write = |name: &str, bytes: &[u8]| {
        let p = dir.path().join(name);
        std::fs::write(&p, bytes).map(|_| p).map_err(|e| autoclip::Error::Io { path: name.into(), source: e })
    };

    let csv = write("toy.csv", b"label,f1,f2\n1,0.5,0.25\n-1,-0.5,0.0\n1,1.5,2.0\n")?;
    let d = load_dataset(&csv, DataFormat::Csv)?;
    println!("csv: n = {}, m = {}, labels {:?}", d.len(), d.width(), d.labels);

    // Four 2x2 images in the standard big-endian layout.
    let pixels: Vec<u8> = (0..16).map(|i| (i * 17) as u8).collect();
    let (images, labels) = encode_idx(&pixels, 4, 2, 2, &[3, 1, 4, 1])?;
    let img = write("toy-images-idx3-ubyte", &images)?;
    write("toy-labels-idx1-ubyte", &labels)?;
    let d = load_dataset(&img, DataFormat::Idx)?;
    println!("idx: n = {}, m = {}, first row {:?}", d.len(), d.width(), d.features.row(0));

    let cut = write("cut-images-idx3-ubyte", &images[..images.len() - 3])?;
    write("cut-labels-idx1-ubyte", &labels)?;
    println!("truncated: {}", load_dataset(&cut, DataFormat::Idx).unwrap_err());
    Ok(())
}
