mod support;

#[test]
fn numerical_gate() {
    support::classifier_gate(3).unwrap();
}
