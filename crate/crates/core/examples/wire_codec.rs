//! Encodes an action command into a checksummed frame, shows the bytes,
//! flips a bit to watch the checksum reject it, and recovers a frame from
//! a stream that starts with garbage.
//!
//!     cargo run --example wire_codec

use teleop_core::channel::vectors::{full_command, small_observation};
use teleop_core::channel::{decode_frame, FrameReader, Message, ObservationFrame, RgbImage};

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect::<Vec<_>>().join(" ")
}

fn main() {
    let msg = Message::Action(full_command());
    let frame = msg.encode();
    println!("action frame, {} bytes", frame.len());
    for chunk in frame.chunks(16) {
        println!("  {}", hex(chunk));
    }

    let mut bad = frame.clone();
    bad[20] ^= 0x01;
    println!("one bit flipped: {:?}", decode_frame(&bad).err());

    let mut stream: Vec<u8> = (0..1024u32).map(|i| (i * 131 % 251) as u8).collect();
    stream.extend(&frame);
    let mut reader = FrameReader::new();
    reader.push(&stream);
    let got = reader.next_frame().map(|f| Message::decode(&f));
    println!("after 1 KiB of garbage: recovered = {}", matches!(got, Some(Ok(ref m)) if *m == msg));
    println!("reader stats: {:?}", reader.stats());

    let obs = small_observation();
    let payload = obs.compress();
    println!("observation: {} raw image bytes, {} byte payload", obs.raw_image_bytes(), payload.len());
    let flat = ObservationFrame {
        rgb: vec![RgbImage::filled("head", 64, 64, [200, 180, 40])],
        ..Default::default()
    };
    println!("constant 64x64 image: {} raw, {} compressed", flat.raw_image_bytes(), flat.compress().len());
}
