#include "support/fixture.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <stdexcept>
#include <vector>

#include "csagc/rng.hpp"

namespace fixture {

using csagc::dataset::FeatureMatrix;

namespace {

const char* kProtocols[] = {"tcp", "udp", "icmp"};
const char* kTrainServices[] = {"http", "smtp", "ftp_data", "private", "domain_u",
                                "telnet", "ecr_i", "other"};
const char* kTestOnlyServices[] = {"aol", "harvest"};
const char* kFlags[] = {"SF", "S0", "REJ", "RSTR"};

// attack names per class; the second group per class only appears in the
// test split (all are in the standard attack table)
const std::vector<const char*> kAttacks[5][2] = {
    {{"normal"}, {"normal"}},
    {{"neptune", "smurf", "back", "teardrop"}, {"apache2", "processtable"}},
    {{"satan", "ipsweep", "portsweep", "nmap"}, {"mscan", "saint"}},
    {{"guess_passwd", "warezclient", "imap"}, {"snmpguess", "httptunnel"}},
    {{"buffer_overflow", "rootkit", "loadmodule"}, {"xterm", "ps"}},
};

// deterministic class/feature-dependent mean. The two rare classes sit close
// to normal traffic (small numeric offsets, same categorical profile) so that
// under heavy imbalance they are only learnable with rebalancing/reweighting.
double feature_mean(int cls, int feat) {
    const std::uint64_t h = csagc::splitmix64((std::uint64_t(cls) << 8) ^ feat);
    const double own = double(h % 7) - 3.0;
    if (cls == 3 || cls == 4) {
        const std::uint64_t h0 = csagc::splitmix64(std::uint64_t(feat));
        return (double(h0 % 7) - 3.0) + 0.5 * own;
    }
    return own;
}

// class index used for the categorical columns; rare classes mimic normal
int categorical_class(int cls) { return cls >= 3 ? 0 : cls; }

}  // namespace

void write_nslkdd(const std::string& path, const std::array<long, 5>& counts,
                  std::uint64_t seed, bool train_split) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("fixture: cannot write " + path);

    std::vector<int> order;
    for (int c = 0; c < 5; ++c) order.insert(order.end(), counts[c], c);
    auto rng = csagc::make_rng(seed, train_split ? "fixture-train" : "fixture-test");
    std::shuffle(order.begin(), order.end(), rng);

    std::normal_distribution<double> noise(0.0, 1.0);
    std::uniform_int_distribution<int> diff(0, 21);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    char buf[32];
    std::string line;
    for (int cls : order) {
        line.clear();
        for (int f = 0; f < csagc::dataset::kNumFeatures; ++f) {
            if (f) line += ',';
            const int cc = categorical_class(cls);
            if (f == 1) {
                line += kProtocols[(cc + int(u(rng) * 2.0)) % 3];
            } else if (f == 2) {
                if (!train_split && u(rng) < 0.002)
                    line += kTestOnlyServices[int(u(rng) * 2.0) % 2];
                else
                    line += kTrainServices[(cc * 3 + int(u(rng) * 3.0)) % 8];
            } else if (f == 3) {
                line += kFlags[(cc + int(u(rng) * 2.0)) % 4];
            } else {
                const double v = feature_mean(cls, f) + noise(rng);
                std::snprintf(buf, sizeof buf, "%.2f", v);
                line += buf;
            }
        }
        const auto& names = kAttacks[cls][!train_split && u(rng) < 0.1 ? 1 : 0];
        line += ',';
        line += names[int(u(rng) * double(names.size())) % names.size()];
        line += ',';
        std::snprintf(buf, sizeof buf, "%d", diff(rng));
        line += buf;
        line += '\n';
        out << line;
    }
}

std::array<long, 5> scaled_counts(const std::array<long, 5>& counts, long total,
                                  long min_per_class) {
    long sum = 0;
    for (long c : counts) sum += c;
    std::array<long, 5> out{};
    for (int c = 0; c < 5; ++c)
        out[c] = std::max(min_per_class, counts[c] * total / sum);
    return out;
}

FeatureMatrix gaussian_task(int n_per_class, int dim, int classes, double sep,
                            std::uint64_t seed) {
    auto rng = csagc::make_rng(seed, "gaussian-task");
    std::normal_distribution<double> noise(0.0, 1.0);

    // fixed unit direction per class, independent of `seed`
    std::vector<std::vector<double>> dirs(classes, std::vector<double>(dim));
    auto dir_rng = csagc::make_rng(12345, "gaussian-task-dirs");
    for (auto& d : dirs) {
        double norm = 0.0;
        for (double& v : d) {
            v = noise(dir_rng);
            norm += v * v;
        }
        norm = std::sqrt(std::max(norm, 1e-12));
        for (double& v : d) v /= norm;
    }

    FeatureMatrix fm;
    fm.values = csagc::ad::Tensor::zeros({n_per_class * classes, dim}, false);
    fm.mu.assign(dim, 0.0);
    fm.sigma.assign(dim, 1.0);
    for (int f = 0; f < dim; ++f) fm.feature_names.push_back("f" + std::to_string(f));
    auto* data = fm.values.data().data();
    int row = 0;
    for (int c = 0; c < classes; ++c)
        for (int i = 0; i < n_per_class; ++i, ++row) {
            for (int f = 0; f < dim; ++f)
                data[std::size_t(row) * dim + f] = sep * dirs[c][f] + noise(rng);
            fm.labels.push_back(c);
        }
    return fm;
}

FeatureMatrix imbalanced_task(int n_majority, int n_minority, int dim, double sep,
                              std::uint64_t seed) {
    FeatureMatrix both = gaussian_task(n_majority, dim, 2, sep, seed);
    FeatureMatrix fm;
    fm.feature_names = both.feature_names;
    fm.mu = both.mu;
    fm.sigma = both.sigma;
    std::vector<int> keep;
    int minority_kept = 0;
    for (int i = 0; i < both.rows(); ++i) {
        if (both.labels[i] == 1 && minority_kept >= n_minority) continue;
        if (both.labels[i] == 1) ++minority_kept;
        keep.push_back(i);
    }
    fm.values = csagc::ad::Tensor::zeros({static_cast<int>(keep.size()), dim}, false);
    for (std::size_t i = 0; i < keep.size(); ++i) {
        std::copy(both.row(keep[i]), both.row(keep[i]) + dim,
                  fm.values.data().begin() + i * dim);
        fm.labels.push_back(both.labels[keep[i]]);
    }
    return fm;
}

}  // namespace fixture
