#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "csagc/tensor.hpp"

namespace csagc::dataset {

enum class TrafficClass { Normal = 0, DoS = 1, Probe = 2, R2L = 3, U2R = 4 };
inline constexpr int kNumClasses = 5;
extern const std::array<const char*, kNumClasses> kClassNames;

// NSL-KDD record schema: 41 features + attack name + difficulty score.
inline constexpr int kNumFeatures = 41;
inline constexpr int kFieldsPerRow = 43;
extern const std::array<const char*, kNumFeatures> kFeatureNames;
// categorical feature indices: protocol_type, service, flag
extern const std::array<int, 3> kCategoricalFeatures;

// attack name -> 5-class mapping; default table follows the usual NSL-KDD
// convention and can be replaced from a file
using AttackMap = std::map<std::string, TrafficClass>;
const AttackMap& default_attack_map();
AttackMap load_attack_map(const std::string& path);

struct RawRecord {
    std::array<std::string, kNumFeatures> fields;
    std::string attack_name;
    int difficulty = 0;
};

struct RecordSet {
    std::vector<RawRecord> rows;
    std::vector<TrafficClass> class_labels;
    std::string split_tag;  // "train" or "test"
};

struct ClassStats {
    std::array<long, kNumClasses> counts{};
    // CI ratio = majority count / class count
    std::array<double, kNumClasses> ci_ratio{};
    long total() const;
    int majority_class() const;
};

struct Encoding {
    // per categorical feature index -> sorted distinct training categories
    std::map<int, std::vector<std::string>> vocab;
    // per numeric feature index: training-split mean and population std
    std::map<int, double> mu;
    std::map<int, double> sigma;
    std::vector<std::string> warnings;  // constant columns etc.

    int width() const;  // encoded dimension D
    std::vector<std::string> feature_names() const;
};

struct FeatureMatrix {
    ad::Tensor values;  // [n_rows, D], no grad tracking
    std::vector<int> labels;
    std::vector<std::string> feature_names;
    std::vector<double> mu;     // per encoded column (0/1 identity for one-hot)
    std::vector<double> sigma;
    long unseen_category_count = 0;  // test-split categories absent from vocab

    int rows() const { return values.shape()[0]; }
    int cols() const { return values.shape()[1]; }
    const double* row(int i) const { return values.data().data() + static_cast<std::size_t>(i) * cols(); }
};

RecordSet load_nslkdd(const std::string& path, const std::string& split_tag,
                      const AttackMap& attack_map = default_attack_map());

Encoding fit_encoding(const RecordSet& train);

FeatureMatrix transform(const RecordSet& records, const Encoding& enc);

ClassStats class_stats(const RecordSet& records);
ClassStats class_stats(const std::vector<int>& labels);

// {DoS,Probe,R2L,U2R} -> 1, Normal -> 0
std::vector<int> binary_labels(const std::vector<int>& five_class);

}  // namespace csagc::dataset
