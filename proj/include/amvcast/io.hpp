#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "amvcast/grid.hpp"

namespace amvcast {

/// Skill-table class axis. Per-class rows condition on the true state;
/// Overall pools every test sample.
enum class SkillClass { Negative = 0, Neutral = 1, Positive = 2, Overall = 3 };

const char* to_string(SkillClass c);
SkillClass skill_class_from_string(const std::string& s);

inline constexpr const char* kModelCnn = "cnn";
inline constexpr const char* kModelCnnMean = "cnn_mean";
inline constexpr const char* kModelPersistence = "persistence";
inline constexpr const char* kModelChance = "chance";

struct SkillRow {
    std::string model;
    int lead = 0;
    SkillClass cls = SkillClass::Overall;
    int repetition = 0;
    double accuracy = 0.0;
    int n_test = 0;
};

/// Accuracy per (model, lead, class, repetition); the pipeline's principal
/// output table.
struct SkillTable {
    std::vector<SkillRow> rows;

    /// Sorts rows by (model, lead, class, repetition).
    void sort_rows();

    /// Checks ranges, key uniqueness, and that accuracy*n_test is a whole
    /// count. Counted-ratio integrality is enforced at `count_tol` (1e-9 for
    /// in-memory tables); chance rows are analytic constants and exempt.
    void validate(double count_tol = 1e-9) const;
};

/// Reads a field stack from its JSON manifest. The data binary lives next to
/// the manifest with a .bin suffix; the mask file is named by the manifest.
FieldStack read_stack(const std::filesystem::path& manifest_path);

/// Writes manifest + data binary + mask for a stack with a shared mask.
/// Returns the manifest path. Bit-exact round trip with read_stack.
std::filesystem::path write_stack(const FieldStack& stack,
                                  const std::filesystem::path& manifest_path);

/// Writes "model,lead,class,repetition,accuracy,n_test" rows in deterministic
/// order with 6-decimal accuracies.
void write_skill_csv(const SkillTable& table, const std::filesystem::path& path);

/// Reads a skill CSV back. Accuracies carry 6-decimal quantization, so the
/// count-integrality check runs at a quantization-aware tolerance.
SkillTable read_skill_csv(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& p);
void write_file_bytes(const std::filesystem::path& p, const void* data, std::size_t n);

/// f32le codecs; no-ops besides a copy on little-endian hosts.
std::vector<float> floats_from_le(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> floats_to_le(const std::vector<float>& values);

/// Companion files of a stack manifest: <stem>.bin and <stem>.mask.bin.
std::filesystem::path data_path_for(const std::filesystem::path& manifest);
std::filesystem::path mask_path_for(const std::filesystem::path& manifest);

}  // namespace amvcast
