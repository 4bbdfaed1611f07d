//! The files in data/vectors are frozen: encoders must keep producing them
//! and decoders must keep reading them.

use std::path::PathBuf;

use teleop_core::action::{unflatten, ActionVector17};
use teleop_core::channel::vectors::{full_command, index_json, small_observation, test_vectors};
use teleop_core::channel::{FrameReader, Message};

fn dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/vectors")
}

fn frozen(name: &str) -> Vec<u8> {
    std::fs::read(dir().join(format!("{name}.bin"))).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn decode_all(bytes: &[u8]) -> Vec<Message> {
    let mut r = FrameReader::new();
    r.push(bytes);
    std::iter::from_fn(|| r.next_frame()).map(|f| Message::decode(&f).unwrap()).collect()
}

#[test]
fn encoders_reproduce_frozen_bytes() {
    for v in test_vectors() {
        let file = frozen(v.name);
        if v.name == "observation_small" {
            // compressed planes may differ between compressor versions
            assert_eq!(decode_all(&file), decode_all(&v.bytes), "{}", v.name);
        } else {
            assert_eq!(file, v.bytes, "{} changed", v.name);
        }
    }
    let index = std::fs::read_to_string(dir().join("index.json")).unwrap();
    assert_eq!(index, index_json());
}

#[test]
fn frozen_frames_decode_to_expected_messages() {
    for v in test_vectors() {
        if v.name == "action_vector17" {
            continue;
        }
        let got = decode_all(&frozen(v.name));
        assert_eq!(got, v.message.into_iter().collect::<Vec<_>>(), "{}", v.name);
    }
}

#[test]
fn frozen_observation_is_pixel_exact() {
    let msgs = decode_all(&frozen("observation_small"));
    let [Message::Observation(obs)] = msgs.as_slice() else {
        panic!("not an observation");
    };
    let want = small_observation();
    assert_eq!(obs.rgb[0].data, want.rgb[0].data);
    assert_eq!(obs.rgb[0].pixel(7, 5), [224, 200, 128]);
    assert_eq!(obs.depth[0].data, want.depth[0].data);
    assert_eq!(obs.depth[0].data[1], 510);
    assert_eq!(obs.depth[0].data[7], 0);
}

#[test]
fn frozen_vector17_unflattens() {
    let v = ActionVector17::from_le_bytes(&frozen("action_vector17")).unwrap();
    let cmd = unflatten(&v);
    let full = full_command();
    assert_eq!(cmd.base.unwrap().value, full.base.unwrap().value);
    assert_eq!(v.0[13], 1.0);
    assert_eq!(v.0[16], 0.75);
}
