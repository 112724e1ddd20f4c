use dcs::core::cover::{Cover, DiscreteCover};
use dcs::core::merge::merge;
use dcs::core::pmmh::simulate_sv;
use dcs::core::proportion::estimate_proportions;
use dcs::core::target::Gamma;
use dcs::experiment::{gamma_fixed_cover, gamma_rejection_parts, sv_truth};
use dcs::io::{self, CoverFile};

#[test]
fn continuous_cover_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cover.json");
    let cover = gamma_fixed_cover();
    io::write_cover(&path, &CoverFile::Continuous(cover.clone())).unwrap();
    match io::read_cover(&path).unwrap() {
        CoverFile::Continuous(back) => assert_eq!(back, cover),
        CoverFile::Discrete(_) => panic!("read back as discrete"),
    }
    let text = io::read_text(&path).unwrap();
    assert!(text.contains("\"inf\""), "{text}");
}

#[test]
fn discrete_cover_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cover.json");
    let cover = DiscreteCover::linked(7, vec![vec![0, 1, 2, 3], vec![3, 4, 5, 6]]).unwrap();
    io::write_cover(&path, &CoverFile::Discrete(cover.clone())).unwrap();
    match io::read_cover(&path).unwrap() {
        CoverFile::Discrete(back) => assert_eq!(back, cover),
        CoverFile::Continuous(_) => panic!("read back as continuous"),
    }
}

#[test]
fn samples_proportions_and_merged_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let gamma = Gamma::new(4.0, 1.0).unwrap();
    let cover = gamma_fixed_cover();
    let parts = gamma_rejection_parts(&gamma, &cover, 500, 3).unwrap().outputs;
    for s in &parts {
        let path = dir.path().join(format!("sample_{}.csv", s.part));
        io::write_sample(&path, s).unwrap();
        assert!(io::sidecar(&path).exists());
        let back = io::read_sample(&path, &cover).unwrap();
        assert_eq!(back.draws, s.draws);
        assert_eq!((back.hits_prev, back.hits_next), (s.hits_prev, s.hits_next));
        assert_eq!(back.prior_overlap, s.prior_overlap);
    }
    let props = estimate_proportions(&parts, &cover).unwrap();
    let p = dir.path().join("proportions.json");
    io::write_proportions(&p, &props).unwrap();
    assert_eq!(io::read_proportions(&p).unwrap(), props);

    let merged = merge(&parts, &props, 9).unwrap();
    let m = dir.path().join("merged.csv");
    io::write_merged(&m, &merged).unwrap();
    assert_eq!(io::read_merged(&m).unwrap(), merged);
}

#[test]
fn tampered_hit_counts_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let gamma = Gamma::new(4.0, 1.0).unwrap();
    let cover = gamma_fixed_cover();
    let parts = gamma_rejection_parts(&gamma, &cover, 200, 4).unwrap().outputs;
    let path = dir.path().join("sample_1.csv");
    io::write_sample(&path, &parts[1]).unwrap();
    let meta = io::sidecar(&path);
    let mut doc: serde_json::Value = serde_json::from_str(&io::read_text(&meta).unwrap()).unwrap();
    doc["hits_prev"] = serde_json::json!(parts[1].hits_prev + 1);
    io::write_json(&meta, &doc).unwrap();
    assert!(io::read_sample(&path, &cover).is_err());
    assert_eq!(cover.len(), 3);
}

#[test]
fn returns_round_trip_with_and_without_header() {
    let dir = tempfile::tempdir().unwrap();
    let (_, series) = simulate_sv(&sv_truth(), 50, 2).unwrap();
    let path = dir.path().join("returns.csv");
    io::write_returns(&path, &series).unwrap();
    assert_eq!(io::read_returns(&path).unwrap(), series);

    let bare = dir.path().join("bare.csv");
    let body: String = series.values().iter().map(|v| format!("{v:e}\n")).collect();
    io::write_text(&bare, &body).unwrap();
    assert_eq!(io::read_returns(&bare).unwrap().values(), series.values());
}
