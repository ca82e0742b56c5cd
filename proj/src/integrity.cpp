#include "ctforge/integrity.hpp"

#include <sodium.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ctforge/error.hpp"
#include "ctforge/hash.hpp"
#include "ctforge/detector.hpp"
#include "ctforge/raw_io.hpp"

namespace ctforge {

namespace {

std::vector<std::uint8_t> from_hex(const std::string& hex) {
    if (hex.size() % 2 != 0) throw Error("bad hex string length");
    std::vector<std::uint8_t> out(hex.size() / 2);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const auto digit = [](char c) -> int {
            if (c >= '0' && c <= '9') return c - '0';
            if (c >= 'a' && c <= 'f') return c - 'a' + 10;
            if (c >= 'A' && c <= 'F') return c - 'A' + 10;
            throw Error("bad hex digit");
        };
        out[i] = static_cast<std::uint8_t>((digit(hex[2 * i]) << 4) |
                                           digit(hex[2 * i + 1]));
    }
    return out;
}

void ensure_sodium() {
    if (sodium_init() < 0) throw Error("libsodium initialization failed");
}

std::string key_id_of(const std::vector<std::uint8_t>& public_key) {
    const auto digest = sha256(public_key);
    return to_hex(digest.data(), 8);
}

std::string take_field(std::istringstream& is, const std::string& key) {
    std::string line;
    if (!std::getline(is, line)) {
        throw Error("signature sidecar: missing " + key);
    }
    const std::string prefix = key + "=";
    if (line.rfind(prefix, 0) != 0) {
        throw Error("signature sidecar: expected " + key + "=, got: " + line);
    }
    return line.substr(prefix.size());
}

}  // namespace

SigningKey generate_signing_key(std::uint64_t seed) {
    ensure_sodium();
    // Derive the 32-byte keypair seed from the integer seed.
    std::array<std::uint8_t, 32> kp_seed{};
    std::vector<std::uint8_t> seed_bytes(8);
    for (int i = 0; i < 8; ++i) {
        seed_bytes[static_cast<std::size_t>(i)] =
            static_cast<std::uint8_t>(seed >> (8 * i));
    }
    kp_seed = sha256(seed_bytes);

    SigningKey key;
    key.secret_key.resize(crypto_sign_SECRETKEYBYTES);
    key.public_key.resize(crypto_sign_PUBLICKEYBYTES);
    crypto_sign_seed_keypair(key.public_key.data(), key.secret_key.data(),
                             kp_seed.data());
    key.key_id = key_id_of(key.public_key);
    return key;
}

std::string ScanSignature::to_text() const {
    std::ostringstream os;
    os << "algorithm=" << algorithm << "\n";
    os << "key_id=" << key_id << "\n";
    os << "digest=" << to_hex(digest.data(), digest.size()) << "\n";
    os << "signature=" << to_hex(signature.data(), signature.size()) << "\n";
    return os.str();
}

ScanSignature ScanSignature::from_text(const std::string& text) {
    std::istringstream is(text);
    ScanSignature sig;
    sig.algorithm = take_field(is, "algorithm");
    sig.key_id = take_field(is, "key_id");
    const auto digest_bytes = from_hex(take_field(is, "digest"));
    if (digest_bytes.size() != sig.digest.size()) {
        throw Error("signature sidecar: bad digest length");
    }
    std::copy(digest_bytes.begin(), digest_bytes.end(), sig.digest.begin());
    sig.signature = from_hex(take_field(is, "signature"));
    return sig;
}

ScanSignature sign_scan(const Volume& volume, const SigningKey& key) {
    ensure_sodium();
    if (key.secret_key.size() != crypto_sign_SECRETKEYBYTES) {
        throw Error("sign_scan: bad secret key length");
    }
    ScanSignature sig;
    sig.key_id = key.key_id;
    sig.digest = sha256(write_raw(volume));
    sig.signature.resize(crypto_sign_BYTES);
    unsigned long long sig_len = 0;
    crypto_sign_detached(sig.signature.data(), &sig_len, sig.digest.data(),
                         sig.digest.size(), key.secret_key.data());
    sig.signature.resize(sig_len);
    return sig;
}

VerifyResult verify_scan(const Volume& volume, const ScanSignature& signature,
                         const std::vector<std::uint8_t>& public_key) {
    ensure_sodium();
    if (signature.algorithm != "sha256-ed25519") {
        return {false, "unsupported algorithm: " + signature.algorithm};
    }
    if (public_key.size() != crypto_sign_PUBLICKEYBYTES) {
        return {false, "bad public key length"};
    }
    if (signature.signature.size() != crypto_sign_BYTES) {
        return {false, "bad signature length"};
    }
    if (signature.key_id != key_id_of(public_key)) {
        return {false, "key id does not match the public key"};
    }
    const auto digest = sha256(write_raw(volume));
    if (digest != signature.digest) {
        return {false, "scan digest differs from the signed digest"};
    }
    if (crypto_sign_verify_detached(signature.signature.data(), digest.data(),
                                    digest.size(), public_key.data()) != 0) {
        return {false, "signature verification failed"};
    }
    return {true, ""};
}

void save_signing_key(const SigningKey& key, const std::string& secret_path,
                      const std::string& public_path) {
    std::ofstream sf(secret_path);
    if (!sf) throw IoError("cannot write " + secret_path);
    sf << "ed25519-secret=" << to_hex(key.secret_key.data(), key.secret_key.size())
       << "\n";
    std::ofstream pf(public_path);
    if (!pf) throw IoError("cannot write " + public_path);
    pf << "ed25519-public=" << to_hex(key.public_key.data(), key.public_key.size())
       << "\n";
}

SigningKey load_signing_key(const std::string& secret_path) {
    std::ifstream f(secret_path);
    if (!f) throw IoError("cannot open " + secret_path);
    std::string line;
    std::getline(f, line);
    const std::string prefix = "ed25519-secret=";
    if (line.rfind(prefix, 0) != 0) {
        throw Error("bad secret key file: " + secret_path);
    }
    SigningKey key;
    key.secret_key = from_hex(line.substr(prefix.size()));
    if (key.secret_key.size() != crypto_sign_SECRETKEYBYTES) {
        throw Error("bad secret key length in " + secret_path);
    }
    key.public_key.resize(crypto_sign_PUBLICKEYBYTES);
    crypto_sign_ed25519_sk_to_pk(key.public_key.data(), key.secret_key.data());
    key.key_id = key_id_of(key.public_key);
    return key;
}

std::vector<std::uint8_t> load_public_key(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open " + path);
    std::string line;
    std::getline(f, line);
    const std::string prefix = "ed25519-public=";
    if (line.rfind(prefix, 0) != 0) {
        throw Error("bad public key file: " + path);
    }
    const auto pk = from_hex(line.substr(prefix.size()));
    if (pk.size() != crypto_sign_PUBLICKEYBYTES) {
        throw Error("bad public key length in " + path);
    }
    return pk;
}

void embed_signature(DicomSlice& slice, const ScanSignature& signature) {
    std::string text = signature.to_text();
    if (text.size() % 2 != 0) text.push_back('\0');
    slice.set_element(tags::kSignaturePrivate, "OB",
                      std::vector<std::uint8_t>(text.begin(), text.end()));
}

std::optional<ScanSignature> extract_signature(const DicomSlice& slice) {
    const auto* e = slice.find(tags::kSignaturePrivate);
    if (e == nullptr) return std::nullopt;
    std::string text(e->value.begin(), e->value.end());
    while (!text.empty() && text.back() == '\0') text.pop_back();
    return ScanSignature::from_text(text);
}

// ---------------------------------------------------------------------------
// Noise-anomaly detection
// ---------------------------------------------------------------------------

std::size_t AnomalyMap::candidate_count() const {
    std::size_t n = 0;
    for (auto c : candidate) {
        if (c != 0) ++n;
    }
    return n;
}

double AnomalyMap::flagged_fraction() const {
    const std::size_t n = candidate_count();
    if (n == 0) return 0.0;
    return static_cast<double>(flagged.size()) / static_cast<double>(n);
}

double AnomalyMap::score_at(Vec3i block) const {
    const std::size_t at =
        static_cast<std::size_t>(block.x) +
        static_cast<std::size_t>(blocks.x) *
            (static_cast<std::size_t>(block.y) +
             static_cast<std::size_t>(blocks.y) * static_cast<std::size_t>(block.z));
    return scores[at];
}

AnomalyMap detect_noise_anomaly(const Volume& volume,
                                const AnomalyConfig& config) {
    const Vec3i d = volume.dims();
    const int be = config.block_edge;
    AnomalyMap map;
    map.blocks = {d.x / be, d.y / be, d.z / be};
    map.threshold = config.score_threshold;
    const std::size_t nblocks = static_cast<std::size_t>(
        std::max(0, map.blocks.x * map.blocks.y * map.blocks.z));
    map.scores.assign(nblocks, 0.0);
    map.candidate.assign(nblocks, 0);
    if (nblocks == 0) return map;

    // Lung fields: connected air components that do not touch the volume
    // border (exterior air does; it also sits on the HU clamp floor, which
    // truncates its noise).
    std::vector<std::uint8_t> lung_air(volume.voxel_count(), 0);
    {
        std::vector<std::uint8_t> air(volume.voxel_count(), 0);
        for (std::size_t i = 0; i < volume.voxel_count(); ++i) {
            air[i] = volume.voxels()[i] < config.air_hu ? 1 : 0;
        }
        std::vector<std::uint8_t> seen(volume.voxel_count(), 0);
        std::vector<std::size_t> stack;
        std::vector<std::size_t> members;
        for (std::size_t start = 0; start < volume.voxel_count(); ++start) {
            if (air[start] == 0 || seen[start] != 0) continue;
            stack.assign(1, start);
            seen[start] = 1;
            members.clear();
            bool touches_border = false;
            while (!stack.empty()) {
                const std::size_t cur = stack.back();
                stack.pop_back();
                members.push_back(cur);
                const int x = static_cast<int>(cur % static_cast<std::size_t>(d.x));
                const int y = static_cast<int>(
                    (cur / static_cast<std::size_t>(d.x)) %
                    static_cast<std::size_t>(d.y));
                const int z = static_cast<int>(
                    cur / (static_cast<std::size_t>(d.x) *
                           static_cast<std::size_t>(d.y)));
                if (x == 0 || y == 0 || z == 0 || x == d.x - 1 || y == d.y - 1 ||
                    z == d.z - 1) {
                    touches_border = true;
                }
                const int neighbors[6][3] = {{1, 0, 0},  {-1, 0, 0}, {0, 1, 0},
                                             {0, -1, 0}, {0, 0, 1},  {0, 0, -1}};
                for (const auto& nb : neighbors) {
                    const int nx = x + nb[0];
                    const int ny = y + nb[1];
                    const int nz = z + nb[2];
                    if (nx < 0 || ny < 0 || nz < 0 || nx >= d.x || ny >= d.y ||
                        nz >= d.z) {
                        continue;
                    }
                    const std::size_t ni = volume.index(nx, ny, nz);
                    if (air[ni] != 0 && seen[ni] == 0) {
                        seen[ni] = 1;
                        stack.push_back(ni);
                    }
                }
            }
            if (!touches_border && members.size() >= 500) {
                for (std::size_t m : members) lung_air[m] = 1;
            }
        }
    }

    // Trust residuals only deep inside the air field: the curvature rim at
    // walls and vessels carries systematic high-pass energy.
    std::vector<std::uint8_t> eligible(volume.voxel_count(), 0);
    {
        const std::vector<double> air_dsq =
            squared_distance_to_false(lung_air, d, volume.spacing());
        const double erosion2 = config.erosion_mm * config.erosion_mm;
        for (std::size_t i = 0; i < volume.voxel_count(); ++i) {
            eligible[i] = (lung_air[i] != 0 && air_dsq[i] >= erosion2) ? 1 : 0;
        }
    }

    // High-pass residual against the local 3^3 mean (clamped borders).
    const auto at = [&](int x, int y, int z) {
        return static_cast<double>(
            volume.at(std::clamp(x, 0, d.x - 1), std::clamp(y, 0, d.y - 1),
                      std::clamp(z, 0, d.z - 1)));
    };
    std::vector<float> residual(volume.voxel_count());
    for (int z = 0; z < d.z; ++z) {
        for (int y = 0; y < d.y; ++y) {
            for (int x = 0; x < d.x; ++x) {
                double sum = 0.0;
                for (int dz = -1; dz <= 1; ++dz) {
                    for (int dy = -1; dy <= 1; ++dy) {
                        for (int dx = -1; dx <= 1; ++dx) {
                            sum += at(x + dx, y + dy, z + dz);
                        }
                    }
                }
                const std::size_t i = volume.index(x, y, z);
                residual[i] = static_cast<float>(at(x, y, z) - sum / 27.0);
            }
        }
    }

    std::vector<double> variances;
    variances.reserve(nblocks);
    std::vector<int> block_index(nblocks, -1);
    std::vector<double> abs_res;
    for (int bz = 0; bz < map.blocks.z; ++bz) {
        for (int by = 0; by < map.blocks.y; ++by) {
            for (int bx = 0; bx < map.blocks.x; ++bx) {
                abs_res.clear();
                for (int z = bz * be; z < (bz + 1) * be; ++z) {
                    for (int y = by * be; y < (by + 1) * be; ++y) {
                        for (int x = bx * be; x < (bx + 1) * be; ++x) {
                            const std::size_t i = volume.index(x, y, z);
                            if (eligible[i] == 0) continue;
                            abs_res.push_back(
                                std::fabs(static_cast<double>(residual[i])));
                        }
                    }
                }
                const std::size_t b =
                    static_cast<std::size_t>(bx) +
                    static_cast<std::size_t>(map.blocks.x) *
                        (static_cast<std::size_t>(by) +
                         static_cast<std::size_t>(map.blocks.y) *
                             static_cast<std::size_t>(bz));
                if (static_cast<int>(abs_res.size()) >=
                    config.min_eligible_voxels) {
                    // Estimator noise must be uniform across blocks for the
                    // pooled median/MAD scoring to be meaningful, so every
                    // block contributes exactly min_eligible_voxels samples
                    // (deterministic scan order). The variance itself is a
                    // 10%-trimmed mean of squares: efficient, yet sparse
                    // structural voxels inside the block cannot move it.
                    abs_res.resize(
                        static_cast<std::size_t>(config.min_eligible_voxels));
                    std::sort(abs_res.begin(), abs_res.end());
                    const std::size_t keep = abs_res.size() * 9 / 10;
                    double sum2 = 0.0;
                    for (std::size_t k = 0; k < keep; ++k) {
                        sum2 += abs_res[k] * abs_res[k];
                    }
                    // Rescale the trimmed mean square to an unbiased variance
                    // under a Gaussian model (E[r^2 | |r| below the 90th
                    // percentile] = 0.5633 sigma^2).
                    const double var = sum2 / (static_cast<double>(keep) * 0.5633);
                    map.candidate[b] = 1;
                    block_index[b] = static_cast<int>(variances.size());
                    variances.push_back(var);
                }
            }
        }
    }

    if (variances.empty()) return map;
    std::vector<double> sorted = variances;
    std::sort(sorted.begin(), sorted.end());
    const double median = sorted[sorted.size() / 2];
    std::vector<double> deviations;
    deviations.reserve(sorted.size());
    for (double v : variances) deviations.push_back(std::fabs(v - median));
    std::sort(deviations.begin(), deviations.end());
    const double mad = deviations[deviations.size() / 2];
    const double denom = std::max(mad, 1e-12);

    for (std::size_t b = 0; b < nblocks; ++b) {
        if (map.candidate[b] == 0) continue;
        const double var = variances[static_cast<std::size_t>(block_index[b])];
        const double score = std::fabs(var - median) / denom;
        map.scores[b] = score;
        if (score > config.score_threshold) {
            const int bx = static_cast<int>(b % static_cast<std::size_t>(map.blocks.x));
            const int by = static_cast<int>(
                (b / static_cast<std::size_t>(map.blocks.x)) %
                static_cast<std::size_t>(map.blocks.y));
            const int bz = static_cast<int>(
                b / (static_cast<std::size_t>(map.blocks.x) *
                     static_cast<std::size_t>(map.blocks.y)));
            map.flagged.push_back({bx, by, bz});
        }
    }
    return map;
}

double max_anomaly_score(const AnomalyMap& map) {
    double mx = 0.0;
    for (double s : map.scores) mx = std::max(mx, s);
    return mx;
}

bool anomaly_verdict(const AnomalyMap& map, double fraction,
                     double strong_score) {
    return map.flagged_fraction() > fraction ||
           max_anomaly_score(map) >= strong_score;
}

double footprint_artifact_score(const AnomalyMap& map, Vec3i origin, Vec3i extent,
                                const AnomalyConfig& config) {
    const int be = config.block_edge;
    double total = 0.0;
    int count = 0;
    for (int bz = 0; bz < map.blocks.z; ++bz) {
        for (int by = 0; by < map.blocks.y; ++by) {
            for (int bx = 0; bx < map.blocks.x; ++bx) {
                const int x0 = bx * be;
                const int y0 = by * be;
                const int z0 = bz * be;
                const bool intersects =
                    x0 < origin.x + extent.x && x0 + be > origin.x &&
                    y0 < origin.y + extent.y && y0 + be > origin.y &&
                    z0 < origin.z + extent.z && z0 + be > origin.z;
                if (!intersects) continue;
                total += map.score_at({bx, by, bz});
                ++count;
            }
        }
    }
    return count > 0 ? total / count : 0.0;
}

}  // namespace ctforge
