use proptest::prelude::*;
use vtembed::checkpoint::{
    decode_checkpoint, encode_checkpoint, read_checkpoint, write_checkpoint, Checkpoint,
    CheckpointConfig,
};
use vtembed::embeddings::{
    parse_stopwords, parse_word_embeddings, read_word_embeddings, word_embeddings_to_string,
    write_stopwords, write_word_embeddings,
};
use vtembed::features::{
    decode_feature_store, encode_feature_store, read_feature_store, write_feature_store,
};
use vtembed::index_file::{decode_index, encode_index, read_index, write_index};
use vtembed::manifest::{manifest_to_string, parse_manifest, read_manifest, write_manifest};
use vtembed::pipeline::{build_index, prepare_corpus};
use vtembed::task::{parse_task, task_to_string};
use vtembed::Error;
use vtembed_core::gated::similarity_matrix;
use vtembed_core::index::query_text;
use vtembed_core::synth::{generate_synthetic, SynthConfig};
use vtembed_core::trainer::{init_rng, OptimizerState};
use vtembed_core::{ClipRecord, FeatureStore, Frame, ModelParameters, Preset};

fn small_synth() -> vtembed_core::synth::SynthData {
    generate_synthetic(&SynthConfig {
        videos_per_topic: 3,
        clips_per_video: 4,
        seed: 9,
        ..SynthConfig::default()
    })
    .unwrap()
}

fn desk_params(seed: u64) -> ModelParameters {
    ModelParameters::init(Preset::Desk.dims(32), &mut init_rng(seed)).unwrap()
}

fn checkpoint(params: ModelParameters, optimizer: Option<OptimizerState>) -> Checkpoint {
    Checkpoint {
        config: CheckpointConfig {
            preset: "desk".into(),
            dims: params.dims.into(),
            run: serde_json::json!({"note": "test"}),
        },
        params,
        optimizer,
    }
}

#[test]
fn manifest_examples() {
    let text = r#"{"clip_id":"a","video_id":"v1","start":0,"end":2,"caption":"cut the paper"}
{"clip_id":"b","video_id":"v2","start":1.5,"end":4,"caption":"fold it","search_rank":3}
{"clip_id":"c","video_id":"v1","start":2,"end":5,"caption":"glue"}
"#;
    let d = parse_manifest(text).unwrap();
    assert_eq!(d.len(), 3);
    assert_eq!(d.groups().len(), 2);
    assert_eq!(d.groups()[0].records, vec![0, 2]);
    assert_eq!(d.records()[1].search_rank, Some(3));

    assert!(parse_manifest("").unwrap().is_empty());

    let bad = "{\"clip_id\":\"a\",\"video_id\":\"v\",\"start\":0,\"end\":1,\"caption\":\"x\"}\n\
               {\"clip_id\":\"zz\",\"video_id\":\"v\",\"start\":1,\"end\":1,\"caption\":\"x\"}\n";
    let e = parse_manifest(bad).unwrap_err().to_string();
    assert!(e.contains("line 2") && e.contains("zz"), "{e}");

    let e = parse_manifest("{\"clip_id\": 1}\n").unwrap_err();
    assert!(matches!(e, Error::Line { line: 1, .. }), "{e}");

    let dup = "{\"clip_id\":\"a\",\"video_id\":\"v\",\"start\":0,\"end\":1,\"caption\":\"x\"}\n".repeat(2);
    assert!(parse_manifest(&dup).unwrap_err().to_string().contains("duplicate clip_id a"));
}

#[test]
fn manifest_file_round_trip() {
    let data = small_synth();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.jsonl");
    write_manifest(&path, data.dataset.records()).unwrap();
    assert_eq!(read_manifest(&path).unwrap(), data.dataset);
}

#[test]
fn feature_store_two_clips_bit_exact() {
    let mut store = FeatureStore::new(4).unwrap();
    store.insert_clip("a".into(), vec![0.1, -2.5, 3e-8, 7.0]).unwrap();
    store.insert_clip("b".into(), vec![f32::MAX, f32::MIN_POSITIVE, -0.0, 1.0]).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.xmfs");
    write_feature_store(&path, &store).unwrap();
    let back = read_feature_store(&path).unwrap();
    for id in ["a", "b"] {
        let x: Vec<u32> = store.clip(id).unwrap().iter().map(|v| v.to_bits()).collect();
        let y: Vec<u32> = back.clip(id).unwrap().iter().map(|v| v.to_bits()).collect();
        assert_eq!(x, y);
    }
}

#[test]
fn feature_store_corruption() {
    let data = small_synth();
    let bytes = encode_feature_store(&data.features).unwrap();
    for cut in [3, 10, 27, bytes.len() / 2, bytes.len() - 1] {
        let e = decode_feature_store(&bytes[..cut]).unwrap_err().to_string();
        assert_eq!(e, "truncated payload", "cut at {cut}");
    }
    let mut extra = bytes.clone();
    extra.push(0);
    assert!(decode_feature_store(&extra).unwrap_err().to_string().contains("trailing"));
    let mut zero_dim = bytes.clone();
    zero_dim[8..12].copy_from_slice(&0u32.to_le_bytes());
    assert!(decode_feature_store(&zero_dim).is_err());
    // a frame timestamp that goes backwards
    let mut store = FeatureStore::new(1).unwrap();
    store
        .insert_video(
            "v".into(),
            vec![
                Frame { timestamp: 0.0, values: vec![1.0] },
                Frame { timestamp: 1.0, values: vec![2.0] },
            ],
        )
        .unwrap();
    let mut b = encode_feature_store(&store).unwrap();
    let second_ts = b.len() - 4 - 8;
    b[second_ts..second_ts + 8].copy_from_slice(&(-1.0f64).to_le_bytes());
    assert!(decode_feature_store(&b).is_err());
}

#[test]
fn synthetic_store_reload_gives_identical_similarities() {
    let data = small_synth();
    let reloaded = decode_feature_store(&encode_feature_store(&data.features).unwrap()).unwrap();
    // every f32 payload compared bit for bit
    assert_eq!(data.features.clips().len(), reloaded.clips().len());
    for ((ia, a), (ib, b)) in data.features.clips().iter().zip(reloaded.clips()) {
        assert_eq!(ia, ib);
        assert!(a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
    for (va, vb) in data.features.videos().iter().zip(reloaded.videos()) {
        for (fa, fb) in va.frames.iter().zip(&vb.frames) {
            assert_eq!(fa.timestamp.to_bits(), fb.timestamp.to_bits());
            assert!(fa.values.iter().zip(&fb.values).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }
    let params = desk_params(1);
    let sims = |store: &FeatureStore| {
        let corpus = prepare_corpus(&data.dataset, store, &data.words, 30).unwrap();
        let clips: Vec<Vec<f64>> = corpus.pairs.iter().map(|p| p.clip.clone()).collect();
        let caps: Vec<_> = corpus.pairs.iter().map(|p| p.caption.clone()).collect();
        similarity_matrix(&clips, &caps, &params).unwrap()
    };
    assert_eq!(sims(&data.features), sims(&reloaded));
}

#[test]
fn word_embedding_examples() {
    let t = parse_word_embeddings("cat 0.1 0.2\ndog 0.3 0.4").unwrap();
    assert_eq!(t.dim(), 2);
    assert_eq!(t.len(), 2);
    assert_eq!(t.get("dog"), Some(&[0.3, 0.4][..]));
    assert_eq!(t.get("cow"), None);

    let e = parse_word_embeddings("cat 0.1 0.2\ncat 0.3 0.4").unwrap_err().to_string();
    assert!(e.contains("line 2") && e.contains("cat"), "{e}");
    let e = parse_word_embeddings("cat 0.1 0.2\ndog 0.3").unwrap_err().to_string();
    assert!(e.contains("line 2") && e.contains("dog"), "{e}");
    assert!(parse_word_embeddings("cat 0.1 zebra").is_err());
    assert!(parse_word_embeddings("\n\n").is_err());
    assert_eq!(parse_stopwords("# list\nthe\n\n a \n"), vec!["the", "a"]);
}

#[test]
fn word_embeddings_round_trip_with_stopwords() {
    let data = small_synth();
    let dir = tempfile::tempdir().unwrap();
    let (e, s) = (dir.path().join("e.txt"), dir.path().join("s.txt"));
    write_word_embeddings(&e, &data.words).unwrap();
    write_stopwords(&s, &data.words).unwrap();
    assert_eq!(read_word_embeddings(&e, Some(&s)).unwrap(), data.words);
    // the bundled list stands in for a missing stop-word file
    let bundled = read_word_embeddings(&e, None).unwrap();
    assert!(bundled.is_stopword("the"));
    assert_eq!(
        word_embeddings_to_string(&bundled),
        word_embeddings_to_string(&data.words)
    );
}

#[test]
fn checkpoint_round_trip_preserves_forward_outputs() {
    let data = small_synth();
    let params = desk_params(4);
    let mut state = OptimizerState::new(&params);
    state.step = 17;
    state.first.video.b1[3] = 0.25;
    state.second.encoder.bias[1] = 1.5e-7f32 as f64;
    let ckpt = checkpoint(params.clone(), Some(state));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.xmck");
    write_checkpoint(&path, &ckpt).unwrap();
    let back = read_checkpoint(&path, Some(Preset::Desk.dims(32))).unwrap();
    assert_eq!(back, ckpt);

    let corpus = prepare_corpus(&data.dataset, &data.features, &data.words, 30).unwrap();
    let clips: Vec<Vec<f64>> = corpus.pairs.iter().map(|p| p.clip.clone()).collect();
    let caps: Vec<_> = corpus.pairs.iter().map(|p| p.caption.clone()).collect();
    let before = similarity_matrix(&clips, &caps, &params).unwrap();
    let after = similarity_matrix(&clips, &caps, &back.params).unwrap();
    assert!(before
        .as_slice()
        .iter()
        .zip(after.as_slice())
        .all(|(a, b)| a.to_bits() == b.to_bits()));

    let no_state = checkpoint(params, None);
    let bytes = encode_checkpoint(&no_state).unwrap();
    assert_eq!(decode_checkpoint(&bytes, None).unwrap(), no_state);
}

#[test]
fn checkpoint_corruption_and_shape_mismatch() {
    let bytes = encode_checkpoint(&checkpoint(desk_params(0), None)).unwrap();
    for cut in [2, 9, 40, bytes.len() - 1] {
        assert_eq!(
            decode_checkpoint(&bytes[..cut], None).unwrap_err().to_string(),
            "truncated payload"
        );
    }
    let e = decode_checkpoint(&bytes, Some(Preset::Paper.dims(32))).unwrap_err();
    assert!(e.to_string().contains("shape mismatch"), "{e}");
    // config blob claims a different embedding size than the stored tensors
    let needle = b"\"embed_dim\":32";
    let json_at = bytes.windows(needle.len()).position(|w| w == needle).unwrap();
    let mut edited = bytes.clone();
    edited[json_at..json_at + 14].copy_from_slice(b"\"embed_dim\":31");
    let e = decode_checkpoint(&edited, None).unwrap_err();
    assert!(e.to_string().contains("shape mismatch for video.w1"), "{e}");
}

#[test]
fn index_round_trip_and_rebuild() {
    let data = small_synth();
    let params = desk_params(2);
    let index = build_index(&params, &data.features, Some(&data.dataset)).unwrap();
    let again = build_index(&params, &data.features, Some(&data.dataset)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (p1, p2) = (dir.path().join("a.xmix"), dir.path().join("b.xmix"));
    write_index(&p1, &index).unwrap();
    write_index(&p2, &again).unwrap();
    assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    let loaded = read_index(&p1).unwrap();
    assert_eq!(loaded, index);
    let caption = &data.dataset.records()[5].caption;
    assert_eq!(
        query_text(&loaded, caption, &data.words, 7, &params).unwrap(),
        query_text(&index, caption, &data.words, 7, &params).unwrap()
    );
    let empty = build_index(&params, &data.features, Some(&Default::default())).unwrap();
    assert!(decode_index(&encode_index(&empty).unwrap()).unwrap().is_empty());
    let bytes = encode_index(&index).unwrap();
    assert_eq!(
        decode_index(&bytes[..bytes.len() - 2]).unwrap_err().to_string(),
        "truncated payload"
    );
}

#[test]
fn task_file_round_trip() {
    let text = r#"{"task_id":"t","steps":["cut wood","sand it"],
        "annotations":{"v2":[{"step":1,"start":3,"end":5}],"v1":[{"step":0,"start":0,"end":1.5}]}}"#;
    let task = parse_task(text).unwrap();
    assert_eq!(task.steps.len(), 2);
    assert_eq!(task.intervals_for("v1"), vec![Some((0.0, 1.5)), None]);
    assert_eq!(parse_task(&task_to_string(&task)).unwrap(), task);
    let bad = r#"{"task_id":"t","steps":["a"],"annotations":{"v":[{"step":4,"start":0,"end":1}]}}"#;
    assert!(parse_task(bad).is_err());
}

fn arb_records() -> impl Strategy<Value = Vec<ClipRecord>> {
    prop::collection::vec(
        (
            0usize..4,
            0.0f64..100.0,
            0.001f64..50.0,
            "[a-z \"\\\\é]{0,12}",
            prop::option::of(1u32..500),
        ),
        0..12,
    )
    .prop_map(|rows| {
        rows.into_iter()
            .enumerate()
            .map(|(i, (v, start, len, caption, search_rank))| ClipRecord {
                clip_id: format!("c{i}"),
                video_id: format!("v{v}"),
                start,
                end: start + len,
                caption,
                search_rank,
            })
            .filter(|r| r.end > r.start)
            .collect()
    })
}

proptest! {
    #[test]
    fn manifest_round_trip(records in arb_records()) {
        let text = manifest_to_string(&records);
        let back = parse_manifest(&text).unwrap();
        prop_assert_eq!(back.into_records(), records);
    }

    #[test]
    fn feature_store_round_trip(
        dim in 1usize..6,
        clips in prop::collection::vec(prop::collection::vec(-1e6f32..1e6, 6), 0..5),
        frames in prop::collection::vec(prop::collection::vec(prop::collection::vec(-1e3f32..1e3, 6), 1..4), 0..3),
    ) {
        let mut store = FeatureStore::new(dim).unwrap();
        for (i, c) in clips.iter().enumerate() {
            store.insert_clip(format!("clip{i}"), c[..dim].to_vec()).unwrap();
        }
        for (i, seq) in frames.iter().enumerate() {
            let fs = seq.iter().enumerate().map(|(t, v)| Frame {
                timestamp: t as f64 * 0.5,
                values: v[..dim].to_vec(),
            }).collect();
            store.insert_video(format!("video{i}"), fs).unwrap();
        }
        let bytes = encode_feature_store(&store).unwrap();
        let back = decode_feature_store(&bytes).unwrap();
        prop_assert_eq!(encode_feature_store(&back).unwrap(), bytes);
        prop_assert_eq!(back, store);
    }
}
