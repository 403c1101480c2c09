//! Turns a small grayscale image into a pixel-affinity graph, with and
//! without block downsampling.
//!
//! cargo run --example image_graphs

use fedrep::data::{downsample_image, image_to_graph};

fn main() -> fedrep::Result<()> {
    // 4x4 image with a bright vertical bar
    let pixels: Vec<f64> = (0..16).map(|p| if p % 4 == 1 { 255.0 } else { 30.0 }).collect();
    let full = image_to_graph(&pixels, 4)?;
    println!("full graph: {} nodes", full.rows());
    println!("edge(0, 1) = {:.3}, edge(0, 2) = {:.3}", full.get(0, 1), full.get(0, 2));

    let small = downsample_image(&pixels, 4, 2)?;
    println!("downsampled pixels: {small:?}");
    let coarse = image_to_graph(&small, 2)?;
    for r in 0..coarse.rows() {
        let row: Vec<String> = coarse.row(r).iter().map(|v| format!("{v:.3}")).collect();
        println!("  {}", row.join(" "));
    }
    Ok(())
}
