#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace cider {

enum class Stratum { HealthyNoSymptoms, HealthyWithCough, AsthmaWithCough, CovidNoCough, CovidCough };

inline constexpr std::array<Stratum, 5> kAllStrata = {Stratum::HealthyNoSymptoms, Stratum::HealthyWithCough,
                                                      Stratum::AsthmaWithCough, Stratum::CovidNoCough,
                                                      Stratum::CovidCough};

std::string_view stratum_name(Stratum s);
/// Throws UnknownStratum.
Stratum parse_stratum(std::string_view name);
bool is_covid_stratum(Stratum s);

struct RecordingPair {
    std::filesystem::path breath_path;
    std::filesystem::path cough_path;
};

struct Participant {
    std::string id;
    bool covid_positive = false;
    Stratum stratum = Stratum::HealthyNoSymptoms;
    std::vector<RecordingPair> recordings;
};

/// Manifest CSV with header participant_id,breath_path,cough_path,label,stratum.
/// Relative paths resolve against the manifest's directory. Rows with the
/// same participant id are grouped (first-appearance order is kept).
std::vector<Participant> load_manifest(const std::filesystem::path& path, bool check_files = true);
void write_manifest(const std::filesystem::path& path, const std::vector<Participant>& participants,
                    const std::filesystem::path& relative_to = {});

inline constexpr int kFoldCount = 4;
inline constexpr int kTestFold = 3;

struct FoldAssignment {
    std::map<std::string, int> fold_of;
    int test_fold = kTestFold;
    std::uint64_t seed = 0;

    int fold(const std::string& participant_id) const;
};

/// Per stratum: seeded shuffle, then round-robin deal into the 4 folds.
/// Strata are processed in a fixed order and each continues the deal where
/// the previous stopped, so overall fold sizes also stay within one.
FoldAssignment make_folds(const std::vector<Participant>& participants, std::uint64_t seed,
                          std::vector<std::string>* warnings = nullptr);

struct Rotation {
    int dev_fold = 0;
    std::array<int, 2> train_folds{};
    int test_fold = kTestFold;
};

std::array<Rotation, 3> rotations(const FoldAssignment& assignment);

struct TaskCohort {
    int task = 0;
    std::vector<const Participant*> members;
    std::map<std::string, int> label_of;  // COVID side = 1

    int positives() const;
    int negatives() const;
};

/// Tasks 1-4. Throws UnknownTask.
TaskCohort select_task(const std::vector<Participant>& participants, int task);

/// Folds file: assignment, seed, per-stratum and per-fold tallies.
nlohmann::ordered_json folds_to_json(const FoldAssignment& assignment, const std::vector<Participant>& participants);
FoldAssignment folds_from_json(const nlohmann::ordered_json& j);
void write_folds(const std::filesystem::path& path, const FoldAssignment& assignment,
                 const std::vector<Participant>& participants);
FoldAssignment read_folds(const std::filesystem::path& path);

/// Throws InvalidArgument if the manifest and fold file disagree on participants.
void check_folds_cover(const FoldAssignment& assignment, const std::vector<Participant>& participants);

/// Count of per-stratum fold sizes: tallies[stratum][fold].
std::map<Stratum, std::array<int, kFoldCount>> stratum_fold_tallies(const FoldAssignment& assignment,
                                                                   const std::vector<Participant>& participants);

}  // namespace cider
