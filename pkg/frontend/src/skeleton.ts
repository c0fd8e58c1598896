// Client-side copy of the 22-joint skeleton used by the service: parent table
// for drawing bones, and the key joint that carries each control group.

import type { WireGroup } from "./types.js";

export const JOINT_NAMES = [
  "pelvis",
  "left_hip", "right_hip", "spine1",
  "left_knee", "right_knee", "spine2",
  "left_ankle", "right_ankle", "spine3",
  "left_foot", "right_foot", "neck",
  "left_collar", "right_collar", "head",
  "left_shoulder", "right_shoulder",
  "left_elbow", "right_elbow",
  "left_wrist", "right_wrist",
] as const;

export const PARENTS = [
  -1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19,
];

export const KEY_JOINT_OF_GROUP: Record<WireGroup, number> = {
  root: JOINT_NAMES.indexOf("pelvis"),
  head: JOINT_NAMES.indexOf("head"),
  left_hand: JOINT_NAMES.indexOf("left_wrist"),
  right_hand: JOINT_NAMES.indexOf("right_wrist"),
  left_foot: JOINT_NAMES.indexOf("left_ankle"),
  right_foot: JOINT_NAMES.indexOf("right_ankle"),
};

export const GROUP_COLORS: Record<WireGroup, string> = {
  root: "#e3b341",
  head: "#58a6ff",
  left_hand: "#f778ba",
  right_hand: "#bc8cff",
  left_foot: "#56d364",
  right_foot: "#76e3ea",
};
