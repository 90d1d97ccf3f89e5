// Frozen pins for the generator stack. Regenerating these means every
// seeded experiment in the repo changes; do not touch.
pub const RAW_SEED0: [u64; 4] = [
    0x53175D61490B23DF,
    0x61DA6F3DC380D507,
    0x5C0FDF91EC9A7BFC,
    0x02EEBF8C3BBE5E1A,
];
pub const DERIVE_0_0: u64 = 0xB57A554F8C372F91;
pub const DERIVE_1_23: u64 = 0x8DFE1242B2E1A89A;
pub const NORMALS_SEED7: [f64; 3] = [
    f64::from_bits(0x3FF21805DBB01B33),
    f64::from_bits(0x4000FCC51EAB333B),
    f64::from_bits(0xBFE7642AAC8D9BE1),
];
