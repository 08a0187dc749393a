use std::ffi::CString;

use ocs::ocs_module;
use pyo3::prelude::*;

fn run(code: &str) {
    pyo3::append_to_inittab!(ocs_module);
    Python::initialize();
    Python::attach(|py| {
        let code = CString::new(code).unwrap();
        if let Err(e) = py.run(&code, None, None) {
            e.print(py);
            panic!("python snippet failed");
        }
    });
}

#[test]
fn module_round_trip() {
    run(r#"
import math
import ocs

text = "id,sire,dam,ebv\n1,0,0,1\n2,0,0,2\n3,1,2,3\n4,1,2,4\n5,2,0,5\n6,3,4,6\n7,1,5,7\n8,7,6,8\n9,5,7,9\n"
ped = ocs.parse_pedigree(text)
assert len(ped) == 9
assert ped.labels[0] == "1"
assert ped.parents[2] == (1, 0)
a = ped.relationship_matrix()
assert a[5][5] == 40 / 32
assert abs(ped.inbreeding()[7] - 0.1875) < 1e-12
assert ocs.parse_pedigree(ped.to_csv()).labels == ped.labels

res = ocs.solve(ped, 0.25)
assert res.status == "Optimal", res
assert abs(res.objective - 5.0636952505) < 1e-7
assert abs(sum(res.contributions) - 1) < 1e-7
assert res.group_coancestry <= 0.25 + 1e-9
simple = ocs.solve(ped, 0.25, formulation="simple")
assert abs(simple.objective - res.objective) < 1e-7

capped = ocs.solve(ped, 0.3, upper=[0.1] + [1.0] * 8, tol=1e-9)
assert capped.contributions[0] <= 0.1 + 1e-7

bad = ocs.solve(ped, 0.01)
assert bad.status == "PrimalInfeasible" and bad.contributions is None

two = ocs.parse_pedigree("id,sire,dam,ebv\na,0,0,1\nb,0,0,0\n")
assert abs(ocs.solve(two, 0.3).objective - (1 + math.sqrt(0.2)) / 2) < 1e-7

one = ocs.parse_pedigree("id,sire,dam,ebv\n1,0,0,1\n")
assert ocs.export_sdpa(one, 0.6).startswith("1\n5\n-1 -1 -1 -1 2\n")

g = ocs.generate_pedigree(seed=1, founders=20, cycles=5, offspring=20)
assert len(g) == 120
assert g.to_csv() == ocs.generate_pedigree(seed=1).to_csv()

try:
    ocs.parse_pedigree("id,sire,dam,ebv\n1,2,0,1\n2,1,0,1\n")
    raise AssertionError("cycle accepted")
except ocs.OcsError as e:
    assert str(e).startswith("cyclic_ancestry"), e

try:
    ocs.solve(ped, 0.25, formulation="dense")
    raise AssertionError("bad formulation accepted")
except ValueError:
    pass
"#);
}
