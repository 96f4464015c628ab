#include "cider/dataset.hpp"

#include "cider/error.hpp"
#include "cider/rng.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <cctype>
#include <sstream>
#include <tuple>

namespace cider {

namespace {

std::string trim(std::string s) {
    const auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                field += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(trim(field));
            field.clear();
        } else {
            field += c;
        }
    }
    fields.push_back(trim(field));
    return fields;
}

bool parse_label(const std::string& text, int line_no) {
    std::string t = text;
    std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
    if (t == "positive" || t == "1" || t == "pos") return true;
    if (t == "negative" || t == "0" || t == "neg") return false;
    throw Error(ErrorKind::InvalidArgument, "line " + std::to_string(line_no) + ": bad label '" + text + "'");
}

}  // namespace

std::string_view stratum_name(Stratum s) {
    switch (s) {
        case Stratum::HealthyNoSymptoms: return "healthy-no-symptoms";
        case Stratum::HealthyWithCough: return "healthy-with-cough";
        case Stratum::AsthmaWithCough: return "asthma-with-cough";
        case Stratum::CovidNoCough: return "COVID-no-cough";
        case Stratum::CovidCough: return "COVID-cough";
    }
    return "unknown";
}

Stratum parse_stratum(std::string_view name) {
    for (Stratum s : kAllStrata) {
        if (stratum_name(s) == name) return s;
    }
    throw Error(ErrorKind::UnknownStratum, "unknown stratum '" + std::string(name) + "'");
}

bool is_covid_stratum(Stratum s) { return s == Stratum::CovidNoCough || s == Stratum::CovidCough; }

std::vector<Participant> load_manifest(const std::filesystem::path& path, bool check_files) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoFailure, "cannot open manifest " + path.string());
    const auto base = path.parent_path();

    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorKind::EmptyDataset, "empty manifest " + path.string());
    const auto header = split_csv_line(line);
    const std::vector<std::string> expected{"participant_id", "breath_path", "cough_path", "label", "stratum"};
    if (header != expected) {
        throw Error(ErrorKind::MalformedHeader,
                    "manifest header must be participant_id,breath_path,cough_path,label,stratum");
    }

    std::vector<Participant> participants;
    std::map<std::string, std::size_t> index;
    std::set<std::tuple<std::string, std::string, std::string>> seen_rows;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != 5) {
            throw Error(ErrorKind::MalformedHeader, "line " + std::to_string(line_no) + ": expected 5 fields");
        }
        const bool positive = parse_label(f[3], line_no);
        const Stratum stratum = parse_stratum(f[4]);
        if (positive != is_covid_stratum(stratum)) {
            throw Error(ErrorKind::LabelStratumConflict,
                        "line " + std::to_string(line_no) + ": label " + f[3] + " with stratum " + f[4]);
        }
        if (!seen_rows.emplace(f[0], f[1], f[2]).second) {
            throw Error(ErrorKind::DuplicateRow, "line " + std::to_string(line_no) + " repeats an earlier row");
        }

        RecordingPair pair;
        pair.breath_path = std::filesystem::path(f[1]).is_absolute() ? std::filesystem::path(f[1]) : base / f[1];
        pair.cough_path = std::filesystem::path(f[2]).is_absolute() ? std::filesystem::path(f[2]) : base / f[2];
        if (check_files) {
            for (const auto& p : {pair.breath_path, pair.cough_path}) {
                if (!std::filesystem::is_regular_file(p)) {
                    throw Error(ErrorKind::MissingFile, "line " + std::to_string(line_no) + ": " + p.string());
                }
            }
        }

        auto [it, inserted] = index.emplace(f[0], participants.size());
        if (inserted) {
            Participant p;
            p.id = f[0];
            p.covid_positive = positive;
            p.stratum = stratum;
            participants.push_back(std::move(p));
        } else {
            const auto& existing = participants[it->second];
            if (existing.stratum != stratum) {
                throw Error(ErrorKind::LabelStratumConflict,
                            "line " + std::to_string(line_no) + ": participant " + f[0] + " changes stratum");
            }
        }
        participants[it->second].recordings.push_back(std::move(pair));
    }
    if (participants.empty()) throw Error(ErrorKind::EmptyDataset, "manifest has no rows: " + path.string());
    return participants;
}

void write_manifest(const std::filesystem::path& path, const std::vector<Participant>& participants,
                    const std::filesystem::path& relative_to) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::IoFailure, "cannot write " + path.string());
    out << "participant_id,breath_path,cough_path,label,stratum\n";
    const auto rel = [&](const std::filesystem::path& p) {
        return relative_to.empty() ? p.generic_string() : p.lexically_relative(relative_to).generic_string();
    };
    for (const auto& p : participants) {
        for (const auto& r : p.recordings) {
            out << p.id << ',' << rel(r.breath_path) << ',' << rel(r.cough_path) << ','
                << (p.covid_positive ? "positive" : "negative") << ',' << stratum_name(p.stratum) << '\n';
        }
    }
    if (!out) throw Error(ErrorKind::IoFailure, "short write to " + path.string());
}

int FoldAssignment::fold(const std::string& participant_id) const {
    const auto it = fold_of.find(participant_id);
    if (it == fold_of.end()) throw Error(ErrorKind::InvalidArgument, "participant " + participant_id + " has no fold");
    return it->second;
}

FoldAssignment make_folds(const std::vector<Participant>& participants, std::uint64_t seed,
                          std::vector<std::string>* warnings) {
    if (participants.empty()) throw Error(ErrorKind::EmptyDataset, "no participants to fold");
    FoldAssignment a;
    a.seed = seed;
    int next_fold = 0;
    for (Stratum s : kAllStrata) {
        std::vector<std::string> ids;
        for (const auto& p : participants) {
            if (p.stratum == s) ids.push_back(p.id);
        }
        if (ids.empty()) continue;
        if (warnings && ids.size() < static_cast<std::size_t>(kFoldCount)) {
            warnings->push_back("stratum " + std::string(stratum_name(s)) + " has only " + std::to_string(ids.size()) +
                                " participants; some folds get none");
        }
        // Sort first so the result depends only on the id set, not manifest order.
        std::sort(ids.begin(), ids.end());
        Rng rng(mix_seed({seed, static_cast<std::uint64_t>(s)}));
        rng.shuffle(ids.begin(), ids.end());
        for (const auto& id : ids) {
            if (!a.fold_of.emplace(id, next_fold).second) {
                throw Error(ErrorKind::DuplicateRow, "participant " + id + " listed twice");
            }
            next_fold = (next_fold + 1) % kFoldCount;
        }
    }
    return a;
}

std::array<Rotation, 3> rotations(const FoldAssignment& assignment) {
    std::array<Rotation, 3> out;
    std::vector<int> rotating;
    for (int f = 0; f < kFoldCount; ++f) {
        if (f != assignment.test_fold) rotating.push_back(f);
    }
    for (int i = 0; i < 3; ++i) {
        out[i].dev_fold = rotating[i];
        out[i].train_folds = {rotating[(i + 1) % 3], rotating[(i + 2) % 3]};
        std::sort(out[i].train_folds.begin(), out[i].train_folds.end());
        out[i].test_fold = assignment.test_fold;
    }
    return out;
}

int TaskCohort::positives() const {
    int n = 0;
    for (const auto& [id, label] : label_of) n += label;
    return n;
}

int TaskCohort::negatives() const { return static_cast<int>(label_of.size()) - positives(); }

TaskCohort select_task(const std::vector<Participant>& participants, int task) {
    if (task < 1 || task > 4) throw Error(ErrorKind::UnknownTask, "task must be 1-4, got " + std::to_string(task));
    TaskCohort cohort;
    cohort.task = task;
    for (const auto& p : participants) {
        bool include = false;
        switch (task) {
            case 1: include = p.covid_positive || p.stratum == Stratum::HealthyNoSymptoms; break;
            case 2: include = p.stratum == Stratum::CovidCough || p.stratum == Stratum::HealthyWithCough; break;
            case 3: include = p.stratum == Stratum::CovidCough || p.stratum == Stratum::AsthmaWithCough; break;
            case 4: include = true; break;
        }
        if (!include) continue;
        cohort.members.push_back(&p);
        cohort.label_of[p.id] = p.covid_positive ? 1 : 0;
    }
    return cohort;
}

std::map<Stratum, std::array<int, kFoldCount>> stratum_fold_tallies(const FoldAssignment& assignment,
                                                                   const std::vector<Participant>& participants) {
    std::map<Stratum, std::array<int, kFoldCount>> tallies;
    for (const auto& p : participants) {
        auto& row = tallies.try_emplace(p.stratum, std::array<int, kFoldCount>{}).first->second;
        ++row[static_cast<std::size_t>(assignment.fold(p.id))];
    }
    return tallies;
}

nlohmann::ordered_json folds_to_json(const FoldAssignment& assignment, const std::vector<Participant>& participants) {
    nlohmann::ordered_json j;
    j["seed"] = assignment.seed;
    j["test_fold"] = assignment.test_fold;
    j["fold_count"] = kFoldCount;
    nlohmann::ordered_json tallies = nlohmann::ordered_json::object();
    for (const auto& [s, row] : stratum_fold_tallies(assignment, participants)) {
        tallies[std::string(stratum_name(s))] = row;
    }
    j["stratum_tallies"] = tallies;
    nlohmann::ordered_json folds = nlohmann::ordered_json::object();
    for (const auto& [id, f] : assignment.fold_of) folds[id] = f;
    j["fold_of"] = folds;
    return j;
}

FoldAssignment folds_from_json(const nlohmann::ordered_json& j) {
    FoldAssignment a;
    a.seed = j.at("seed").get<std::uint64_t>();
    a.test_fold = j.value("test_fold", kTestFold);
    if (a.test_fold != kTestFold) throw Error(ErrorKind::InvalidArgument, "test fold must be 3");
    for (const auto& [id, f] : j.at("fold_of").items()) {
        const int fold = f.get<int>();
        if (fold < 0 || fold >= kFoldCount) throw Error(ErrorKind::InvalidArgument, "fold index out of range for " + id);
        a.fold_of[id] = fold;
    }
    return a;
}

void write_folds(const std::filesystem::path& path, const FoldAssignment& assignment,
                 const std::vector<Participant>& participants) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::IoFailure, "cannot write " + path.string());
    out << folds_to_json(assignment, participants).dump(2) << '\n';
}

FoldAssignment read_folds(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoFailure, "cannot open " + path.string());
    return folds_from_json(nlohmann::ordered_json::parse(in));
}

void check_folds_cover(const FoldAssignment& assignment, const std::vector<Participant>& participants) {
    if (assignment.fold_of.size() != participants.size()) {
        throw Error(ErrorKind::InvalidArgument, "fold file lists " + std::to_string(assignment.fold_of.size()) +
                                                    " participants, manifest has " +
                                                    std::to_string(participants.size()));
    }
    for (const auto& p : participants) {
        if (!assignment.fold_of.contains(p.id)) {
            throw Error(ErrorKind::InvalidArgument, "participant " + p.id + " missing from fold file");
        }
    }
}

}  // namespace cider
