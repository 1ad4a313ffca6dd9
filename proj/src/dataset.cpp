#include "csagc/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "csagc/errors.hpp"

namespace csagc::dataset {

const std::array<const char*, kNumClasses> kClassNames = {"Normal", "DoS", "Probe", "R2L", "U2R"};

const std::array<const char*, kNumFeatures> kFeatureNames = {
    "duration", "protocol_type", "service", "flag", "src_bytes", "dst_bytes", "land",
    "wrong_fragment", "urgent", "hot", "num_failed_logins", "logged_in", "num_compromised",
    "root_shell", "su_attempted", "num_root", "num_file_creations", "num_shells",
    "num_access_files", "num_outbound_cmds", "is_host_login", "is_guest_login", "count",
    "srv_count", "serror_rate", "srv_serror_rate", "rerror_rate", "srv_rerror_rate",
    "same_srv_rate", "diff_srv_rate", "srv_diff_host_rate", "dst_host_count",
    "dst_host_srv_count", "dst_host_same_srv_rate", "dst_host_diff_srv_rate",
    "dst_host_same_src_port_rate", "dst_host_srv_diff_host_rate", "dst_host_serror_rate",
    "dst_host_srv_serror_rate", "dst_host_rerror_rate", "dst_host_srv_rerror_rate"};

const std::array<int, 3> kCategoricalFeatures = {1, 2, 3};

const AttackMap& default_attack_map() {
    static const AttackMap map = [] {
        AttackMap m;
        m["normal"] = TrafficClass::Normal;
        for (const char* a : {"back", "land", "neptune", "pod", "smurf", "teardrop", "apache2",
                              "udpstorm", "processtable", "worm", "mailbomb"})
            m[a] = TrafficClass::DoS;
        for (const char* a : {"satan", "ipsweep", "nmap", "portsweep", "mscan", "saint"})
            m[a] = TrafficClass::Probe;
        for (const char* a : {"guess_passwd", "ftp_write", "imap", "phf", "multihop",
                              "warezmaster", "warezclient", "spy", "xlock", "xsnoop",
                              "snmpguess", "snmpgetattack", "httptunnel", "sendmail", "named"})
            m[a] = TrafficClass::R2L;
        for (const char* a : {"buffer_overflow", "loadmodule", "rootkit", "perl", "sqlattack",
                              "xterm", "ps"})
            m[a] = TrafficClass::U2R;
        return m;
    }();
    return map;
}

AttackMap load_attack_map(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("attack map file not found: " + path);
    AttackMap m;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        auto comma = line.find(',');
        if (comma == std::string::npos)
            throw ParseError(path + ":" + std::to_string(lineno) + ": expected attack,class");
        std::string attack = line.substr(0, comma);
        std::string cls = line.substr(comma + 1);
        if (!cls.empty() && cls.back() == '\r') cls.pop_back();
        auto it = std::find_if(kClassNames.begin(), kClassNames.end(),
                               [&](const char* n) { return cls == n; });
        if (it == kClassNames.end())
            throw ParseError(path + ":" + std::to_string(lineno) + ": unknown class '" + cls +
                             "'");
        m[attack] = static_cast<TrafficClass>(it - kClassNames.begin());
    }
    return m;
}

long ClassStats::total() const {
    long t = 0;
    for (long c : counts) t += c;
    return t;
}

int ClassStats::majority_class() const {
    return static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

RecordSet load_nslkdd(const std::string& path, const std::string& split_tag,
                      const AttackMap& attack_map) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    RecordSet rs;
    rs.split_tag = split_tag;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        RawRecord rec;
        std::size_t pos = 0;
        int field = 0;
        while (field < kFieldsPerRow) {
            std::size_t comma = line.find(',', pos);
            std::string tok = comma == std::string::npos ? line.substr(pos)
                                                         : line.substr(pos, comma - pos);
            if (field < kNumFeatures) {
                rec.fields[field] = tok;
            } else if (field == kNumFeatures) {
                rec.attack_name = tok;
            } else {
                try {
                    rec.difficulty = std::stoi(tok);
                } catch (const std::exception&) {
                    throw ParseError(path + ":" + std::to_string(lineno) +
                                     ": bad difficulty score '" + tok + "'");
                }
            }
            ++field;
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        if (field != kFieldsPerRow)
            throw ParseError(path + ":" + std::to_string(lineno) + ": expected " +
                             std::to_string(kFieldsPerRow) + " fields, got " +
                             std::to_string(field));
        auto it = attack_map.find(rec.attack_name);
        if (it == attack_map.end())
            throw ParseError(path + ":" + std::to_string(lineno) + ": unknown attack label '" +
                             rec.attack_name + "'");
        rs.class_labels.push_back(it->second);
        rs.rows.push_back(std::move(rec));
    }
    return rs;
}

namespace {

double numeric_field(const RawRecord& rec, int f) {
    try {
        return std::stod(rec.fields[f]);
    } catch (const std::exception&) {
        throw ParseError(std::string("non-numeric value '") + rec.fields[f] + "' in feature " +
                         kFeatureNames[f]);
    }
}

bool is_categorical(int f) {
    return std::find(kCategoricalFeatures.begin(), kCategoricalFeatures.end(), f) !=
           kCategoricalFeatures.end();
}

}  // namespace

Encoding fit_encoding(const RecordSet& train) {
    if (train.rows.empty()) throw ContractError("fit_encoding: empty training split");
    Encoding enc;
    for (int f : kCategoricalFeatures) {
        std::set<std::string> vals;
        for (const auto& r : train.rows) vals.insert(r.fields[f]);
        enc.vocab[f] = std::vector<std::string>(vals.begin(), vals.end());
    }
    const double n = static_cast<double>(train.rows.size());
    for (int f = 0; f < kNumFeatures; ++f) {
        if (is_categorical(f)) continue;
        double s = 0.0;
        for (const auto& r : train.rows) s += numeric_field(r, f);
        const double mu = s / n;
        double ss = 0.0;
        for (const auto& r : train.rows) {
            const double d = numeric_field(r, f) - mu;
            ss += d * d;
        }
        double sigma = std::sqrt(ss / n);  // population std
        if (sigma == 0.0) {
            sigma = 1.0;
            enc.warnings.push_back(std::string("constant numeric column ") + kFeatureNames[f] +
                                   "; sigma forced to 1");
        }
        enc.mu[f] = mu;
        enc.sigma[f] = sigma;
    }
    return enc;
}

int Encoding::width() const {
    int w = static_cast<int>(mu.size());
    for (const auto& [f, v] : vocab) w += static_cast<int>(v.size());
    return w;
}

std::vector<std::string> Encoding::feature_names() const {
    std::vector<std::string> names;
    for (int f = 0; f < kNumFeatures; ++f) {
        auto it = vocab.find(f);
        if (it != vocab.end()) {
            for (const auto& cat : it->second)
                names.push_back(std::string(kFeatureNames[f]) + "_" + cat);
        } else {
            names.push_back(kFeatureNames[f]);
        }
    }
    return names;
}

FeatureMatrix transform(const RecordSet& records, const Encoding& enc) {
    const int D = enc.width();
    const int n = static_cast<int>(records.rows.size());
    FeatureMatrix fm;
    fm.feature_names = enc.feature_names();
    fm.mu.assign(D, 0.0);
    fm.sigma.assign(D, 1.0);
    {
        int col = 0;
        for (int f = 0; f < kNumFeatures; ++f) {
            auto it = enc.vocab.find(f);
            if (it != enc.vocab.end()) {
                col += static_cast<int>(it->second.size());
            } else {
                fm.mu[col] = enc.mu.at(f);
                fm.sigma[col] = enc.sigma.at(f);
                ++col;
            }
        }
    }
    std::vector<double> data(static_cast<std::size_t>(n) * D, 0.0);
    for (int i = 0; i < n; ++i) {
        const auto& rec = records.rows[i];
        double* out = data.data() + static_cast<std::size_t>(i) * D;
        int col = 0;
        for (int f = 0; f < kNumFeatures; ++f) {
            auto it = enc.vocab.find(f);
            if (it != enc.vocab.end()) {
                const auto& vocab = it->second;
                auto pos = std::lower_bound(vocab.begin(), vocab.end(), rec.fields[f]);
                if (pos != vocab.end() && *pos == rec.fields[f]) {
                    out[col + (pos - vocab.begin())] = 1.0;
                } else {
                    // category unseen during fit: all-zero block
                    fm.unseen_category_count += 1;
                }
                col += static_cast<int>(vocab.size());
            } else {
                const double mu = enc.mu.at(f);
                const double sigma = enc.sigma.at(f);
                out[col] = (numeric_field(rec, f) - mu) / sigma;
                ++col;
            }
        }
    }
    fm.values = ad::Tensor({n, D}, std::move(data));
    fm.labels.reserve(n);
    for (auto c : records.class_labels) fm.labels.push_back(static_cast<int>(c));
    return fm;
}

ClassStats class_stats(const std::vector<int>& labels) {
    if (labels.empty()) throw ContractError("class_stats: empty input");
    ClassStats st;
    for (int l : labels) {
        if (l < 0 || l >= kNumClasses)
            throw ContractError("class_stats: label out of range: " + std::to_string(l));
        st.counts[l] += 1;
    }
    const long mx = *std::max_element(st.counts.begin(), st.counts.end());
    for (int c = 0; c < kNumClasses; ++c)
        st.ci_ratio[c] = st.counts[c] > 0 ? static_cast<double>(mx) / st.counts[c] : 0.0;
    return st;
}

ClassStats class_stats(const RecordSet& records) {
    std::vector<int> labels;
    labels.reserve(records.class_labels.size());
    for (auto c : records.class_labels) labels.push_back(static_cast<int>(c));
    return class_stats(labels);
}

std::vector<int> binary_labels(const std::vector<int>& five_class) {
    std::vector<int> out;
    out.reserve(five_class.size());
    for (int l : five_class) out.push_back(l == 0 ? 0 : 1);
    return out;
}

}  // namespace csagc::dataset
