use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Joint hierarchy. The reference pose is all-identity rotations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skeleton {
    joint_names: Vec<String>,
    parents: Vec<i32>,
}

impl Skeleton {
    pub fn new(joint_names: Vec<String>, parents: Vec<i32>) -> Result<Self> {
        let j = joint_names.len();
        if j == 0 {
            return Err(Error::InvalidSkeleton("no joints".into()));
        }
        if parents.len() != j {
            return Err(Error::InvalidSkeleton(format!(
                "{} joint names but {} parent indices",
                j,
                parents.len()
            )));
        }
        let roots = parents.iter().filter(|&&p| p == -1).count();
        if roots != 1 {
            return Err(Error::InvalidSkeleton(format!(
                "expected exactly one root, found {roots}"
            )));
        }
        for (i, &p) in parents.iter().enumerate() {
            if p < -1 || p >= j as i32 || p == i as i32 {
                return Err(Error::InvalidSkeleton(format!(
                    "joint {i} has invalid parent {p}"
                )));
            }
        }
        // every joint must reach the root in fewer than J hops
        for start in 0..j {
            let mut cur = start as i32;
            let mut hops = 0;
            while cur != -1 {
                cur = parents[cur as usize];
                hops += 1;
                if hops > j {
                    return Err(Error::InvalidSkeleton(format!(
                        "cycle through joint {start}"
                    )));
                }
            }
        }
        Ok(Self {
            joint_names,
            parents,
        })
    }

    pub fn joint_count(&self) -> usize {
        self.joint_names.len()
    }

    pub fn joint_names(&self) -> &[String] {
        &self.joint_names
    }

    pub fn parents(&self) -> &[i32] {
        &self.parents
    }

    pub fn root(&self) -> usize {
        self.parents.iter().position(|&p| p == -1).unwrap_or(0)
    }

    pub fn joint_index(&self, name: &str) -> Option<usize> {
        self.joint_names.iter().position(|n| n == name)
    }

    /// Joints ordered so that every parent precedes its children.
    pub fn topological_order(&self) -> Vec<usize> {
        let j = self.joint_count();
        let mut depth = vec![0usize; j];
        for (i, d) in depth.iter_mut().enumerate() {
            let mut cur = self.parents[i];
            while cur != -1 {
                *d += 1;
                cur = self.parents[cur as usize];
            }
        }
        let mut order: Vec<usize> = (0..j).collect();
        order.sort_by_key(|&i| (depth[i], i));
        order
    }

    /// A simple chain skeleton, handy for tests.
    pub fn chain(joint_count: usize) -> Result<Self> {
        let names = (0..joint_count).map(|i| format!("joint{i}")).collect();
        let parents = (0..joint_count as i32).map(|i| i - 1).collect();
        Self::new(names, parents)
    }

    /// The 12-joint upper-body skeleton used by the synthetic corpus.
    pub fn upper_body() -> Self {
        let names = [
            "pelvis",
            "spine",
            "spine1",
            "chest",
            "neck",
            "head",
            "l_shoulder",
            "l_elbow",
            "l_wrist",
            "r_shoulder",
            "r_elbow",
            "r_wrist",
        ];
        let parents = vec![-1, 0, 1, 2, 3, 4, 3, 6, 7, 3, 9, 10];
        Self::new(names.iter().map(|s| s.to_string()).collect(), parents)
            .expect("static skeleton is valid")
    }
}
