#pragma once

#include <array>

namespace fruitmap::oracles {

// Field-trial per-scan load estimates: one-sided rows for sides A and B, then the
// two-sided row. Accuracy cells are printed truncated or rounded to 2 d.p.
struct OneSidedRow {
    int calculated;
    double accuracy;
    double precision;
    double recall;
    double f1;
};

struct ScanRow {
    int scan;
    int ground_truth;
    OneSidedRow side_a;
    OneSidedRow side_b;
    OneSidedRow both;
};

inline constexpr std::array<ScanRow, 10> kTable{{
    {1, 52, {29, 55.76, 0.966, 0.875, 0.918}, {35, 67.3, 0.914, 1.0, 0.955}, {63, 78.84, 0.762, 0.923, 0.835}},
    {2, 53, {28, 52.83, 0.964, 0.871, 0.915}, {39, 73.58, 0.846, 0.971, 0.904}, {60, 86.79, 0.817, 0.925, 0.868}},
    {3, 61, {45, 73.77, 0.867, 1.0, 0.929}, {30, 49.18, 0.967, 0.935, 0.951}, {59, 96.72, 0.915, 0.885, 0.9}},
    {4, 69, {58, 84.05, 0.914, 0.964, 0.938}, {36, 52.17, 1.0, 0.923, 0.96}, {71, 97.1, 0.93, 0.957, 0.943}},
    {5, 46, {42, 91.3, 0.857, 0.9, 0.878}, {45, 97.82, 0.956, 0.977, 0.966}, {59, 71.73, 0.695, 0.911, 0.788}},
    {6, 59, {44, 74.57, 0.932, 0.976, 0.953}, {56, 94.91, 0.929, 0.963, 0.946}, {78, 67.79, 0.744, 0.983, 0.847}},
    {7, 48, {37, 77.08, 0.919, 0.895, 0.907}, {28, 58.33, 0.857, 0.774, 0.813}, {47, 97.91, 0.872, 0.854, 0.863}},
    {8, 37, {31, 83.78, 0.903, 0.933, 0.918}, {28, 75.67, 0.964, 0.818, 0.885}, {36, 97.29, 0.972, 0.946, 0.959}},
    {9, 40, {29, 72.5, 0.862, 0.893, 0.877}, {31, 77.5, 0.839, 1.0, 0.912}, {57, 57.5, 0.684, 0.975, 0.804}},
    {10, 50, {37, 74.0, 0.865, 0.865, 0.865}, {44, 88.0, 0.818, 0.947, 0.878}, {70, 60.0, 0.643, 0.9, 0.75}},
}};

}  // namespace fruitmap::oracles
