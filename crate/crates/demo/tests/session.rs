use mcg_demo::{Session, MAX_PROPOSALS};

#[test]
fn synthetic_session_renders() {
    let s = Session::synthetic(3, 32).unwrap();
    let n = 32 * 32 * 4;
    assert_eq!(s.image_rgba().len(), n);
    let levels = s.levels().to_vec();
    assert!(!levels.is_empty() && levels.windows(2).all(|w| w[0] < w[1]));
    let (fine, img) = s.boundaries(f64::NEG_INFINITY);
    let (coarse, _) = s.boundaries(*levels.last().unwrap());
    assert_eq!(coarse, 1);
    assert!(fine > coarse);
    assert_eq!(img.len(), n);
    assert_eq!(s.eigenvector(0).unwrap().len(), n);
    assert!(s.eigenvector(s.eigenvector_count()).is_err());
    assert!(s.proposal_count() > 0 && s.proposal_count() <= MAX_PROPOSALS);
    assert_eq!(s.proposal(0).unwrap().len(), n);
    assert!(s.proposal(s.proposal_count()).is_err());
}

#[test]
fn rgba_input_is_checked() {
    assert!(Session::from_rgba(4, 4, &[0; 10]).is_err());
    assert!(Session::from_rgba(0, 4, &[]).is_err());
    let rgba: Vec<u8> = (0..16).flat_map(|i| if i % 4 >= 2 { [255, 255, 255, 255] } else { [0, 0, 0, 255] }).collect();
    let s = Session::from_rgba(4, 4, &rgba).unwrap();
    assert_eq!(s.image_rgba(), rgba);
    assert!(s.boundaries(f64::NEG_INFINITY).0 >= 2);
}
