//! Opening removes specks, dilation widens what survives.
//!
//! Run with `cargo run --example morphology`.

use riverwatch::mask::BinaryMask;
use riverwatch::morphology::{dilate, erode, open, Kernel};

fn show(title: &str, m: &BinaryMask) {
    println!("{title} ({} set)", m.count_ones());
    for y in 0..m.height() {
        let row: String = (0..m.width())
            .map(|x| if m.get(y, x) { '#' } else { '.' })
            .collect();
        println!("  {row}");
    }
}

fn main() -> riverwatch::Result<()> {
    let mut m = BinaryMask::from_fn(24, 12, |y, x| (3..9).contains(&y) && (4..12).contains(&x));
    m.set(2, 18, true);
    m.set(9, 20, true);
    let k = Kernel::new(3)?;
    show("input", &m);
    show("erode", &erode(&m, k));
    show("dilate", &dilate(&m, k));
    show("open", &open(&m, k));
    show("dilate(open)", &dilate(&open(&m, k), k));
    Ok(())
}
