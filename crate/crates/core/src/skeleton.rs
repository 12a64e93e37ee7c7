//! Body layout: 22 named joints, of which the pelvis is the root and is
//! carried by the 4 root channels (yaw, x, y, height) rather than a 9-dim
//! feature block. The remaining 21 joints each carry a 6d rotation plus a
//! 3d world position.

/// Total named joints, pelvis included.
pub const NUM_JOINTS: usize = 22;
/// Joints carrying a 9-dim feature block (all but the pelvis).
pub const FEATURE_JOINTS: usize = 21;
/// Body parts.
pub const NUM_PARTS: usize = 5;
/// Joints per part.
pub const PART_JOINTS: usize = 7;
/// Per-frame feature width: 21 * 9 + 4 root + 4 contact.
pub const FRAME_DIM: usize = FEATURE_JOINTS * 9 + 8;
/// Per-part feature width: 7 * 9 + 4 root + 4 contact.
pub const PART_DIM: usize = PART_JOINTS * 9 + 8;

pub const ROOT_OFFSET: usize = FEATURE_JOINTS * 9;
pub const CONTACT_OFFSET: usize = ROOT_OFFSET + 4;

/// Root channel layout within the 4-wide root block.
pub const ROOT_YAW: usize = 0;
pub const ROOT_X: usize = 1;
pub const ROOT_Y: usize = 2;
pub const ROOT_Z: usize = 3;

pub const JOINT_NAMES: [&str; NUM_JOINTS] = [
    "pelvis", "l_hip", "r_hip", "spine1", "l_knee", "r_knee", "spine2", "l_ankle", "r_ankle",
    "spine3", "l_foot", "r_foot", "neck", "l_collar", "r_collar", "head", "l_shoulder",
    "r_shoulder", "l_elbow", "r_elbow", "l_wrist", "r_wrist",
];

pub const PELVIS: usize = 0;
pub const L_HIP: usize = 1;
pub const R_HIP: usize = 2;
pub const SPINE1: usize = 3;
pub const L_KNEE: usize = 4;
pub const R_KNEE: usize = 5;
pub const SPINE2: usize = 6;
pub const L_ANKLE: usize = 7;
pub const R_ANKLE: usize = 8;
pub const SPINE3: usize = 9;
pub const L_FOOT: usize = 10;
pub const R_FOOT: usize = 11;
pub const NECK: usize = 12;
pub const L_COLLAR: usize = 13;
pub const R_COLLAR: usize = 14;
pub const HEAD: usize = 15;
pub const L_SHOULDER: usize = 16;
pub const R_SHOULDER: usize = 17;
pub const L_ELBOW: usize = 18;
pub const R_ELBOW: usize = 19;
pub const L_WRIST: usize = 20;
pub const R_WRIST: usize = 21;

/// Joint groups in part order {left arm, left leg, torso, right leg, right arm}.
/// The three spine joints are shared by every part; the collars are shared
/// between the matching arm and the torso.
pub const PART_MAP: [[usize; PART_JOINTS]; NUM_PARTS] = [
    [SPINE1, SPINE2, SPINE3, L_COLLAR, L_SHOULDER, L_ELBOW, L_WRIST],
    [SPINE1, SPINE2, SPINE3, L_HIP, L_KNEE, L_ANKLE, L_FOOT],
    [SPINE1, SPINE2, SPINE3, NECK, L_COLLAR, R_COLLAR, HEAD],
    [SPINE1, SPINE2, SPINE3, R_HIP, R_KNEE, R_ANKLE, R_FOOT],
    [SPINE1, SPINE2, SPINE3, R_COLLAR, R_SHOULDER, R_ELBOW, R_WRIST],
];

pub const PART_NAMES: [&str; NUM_PARTS] = ["left_arm", "left_leg", "torso", "right_leg", "right_arm"];

/// Joints whose contact channel is tracked, in contact-channel order.
pub const CONTACT_JOINTS: [usize; 4] = [L_ANKLE, R_ANKLE, L_FOOT, R_FOOT];

/// Parent of each joint, pelvis rooted at itself. Used for rendering bones.
pub const PARENTS: [usize; NUM_JOINTS] = [
    PELVIS, PELVIS, PELVIS, PELVIS, L_HIP, R_HIP, SPINE1, L_KNEE, R_KNEE, SPINE2, L_ANKLE,
    R_ANKLE, SPINE3, SPINE3, SPINE3, NECK, L_COLLAR, R_COLLAR, L_SHOULDER, R_SHOULDER, L_ELBOW,
    R_ELBOW,
];

/// Skeleton description: joint names plus the five-part decomposition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Skeleton {
    pub joint_names: Vec<String>,
    pub part_map: [[usize; PART_JOINTS]; NUM_PARTS],
}

impl Default for Skeleton {
    fn default() -> Self {
        Skeleton {
            joint_names: JOINT_NAMES.iter().map(|s| s.to_string()).collect(),
            part_map: PART_MAP,
        }
    }
}

impl Skeleton {
    /// Number of parts containing the given joint (0 for the pelvis, which is
    /// carried by the root channels instead).
    pub fn share_count(&self, joint: usize) -> usize {
        self.part_map.iter().filter(|g| g.contains(&joint)).count()
    }

    /// Offset of the 9-dim feature block for a non-pelvis joint.
    pub fn block_offset(joint: usize) -> usize {
        debug_assert!((1..NUM_JOINTS).contains(&joint));
        (joint - 1) * 9
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn part_groups_have_seven_joints_and_share_spines() {
        let sk = Skeleton::default();
        for group in &sk.part_map {
            assert_eq!(group.len(), 7);
            for s in [SPINE1, SPINE2, SPINE3] {
                assert!(group.contains(&s));
            }
        }
        assert_eq!(sk.share_count(SPINE1), 5);
        assert_eq!(sk.share_count(SPINE2), 5);
        assert_eq!(sk.share_count(SPINE3), 5);
        assert_eq!(sk.share_count(L_COLLAR), 2);
        assert_eq!(sk.share_count(R_COLLAR), 2);
        assert_eq!(sk.share_count(L_WRIST), 1);
        assert_eq!(sk.share_count(PELVIS), 0);
    }

    #[test]
    fn every_feature_joint_is_covered() {
        let sk = Skeleton::default();
        for j in 1..NUM_JOINTS {
            assert!(sk.share_count(j) >= 1, "joint {} uncovered", j);
        }
    }

    #[test]
    fn dims_line_up() {
        assert_eq!(FRAME_DIM, 197);
        assert_eq!(PART_DIM, 71);
        assert_eq!(CONTACT_OFFSET + 4, FRAME_DIM);
    }
}
