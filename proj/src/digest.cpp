#include "dive/digest.hpp"

#include "dive/errors.hpp"

#include <openssl/evp.h>

#include <fmt/chrono.h>
#include <fmt/format.h>

#include <array>
#include <atomic>
#include <chrono>
#include <fstream>
#include <memory>
#include <sstream>
#include <thread>

namespace dive {

namespace {

std::string to_hex(const unsigned char* data, unsigned int len) {
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(kHex[data[i] >> 4]);
        out.push_back(kHex[data[i] & 0x0f]);
    }
    return out;
}

} // namespace

std::string sha256_hex(std::string_view bytes) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), md.data(), &len) != 1) {
        throw Error("sha256: OpenSSL digest failure");
    }
    return to_hex(md.data(), len);
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ValidationError("cannot read file: " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string sha256_file(const std::filesystem::path& path) {
    return sha256_hex(read_file(path));
}

std::string base64_encode(std::string_view bytes) {
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                  reinterpret_cast<const unsigned char*>(bytes.data()),
                                  static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
    static std::atomic<unsigned long> counter{0};
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    const auto tid = std::hash<std::thread::id>{}(std::this_thread::get_id());
    auto tmp = path;
    tmp += fmt::format(".tmp.{:x}.{}", tid, counter.fetch_add(1));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw Error("cannot write file: " + tmp.string());
        }
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) {
            throw Error("short write: " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

std::string utc_now_iso() {
    const auto now = std::chrono::system_clock::now();
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    return fmt::format("{:%Y-%m-%dT%H:%M:%S}.{:03d}Z", fmt::gmtime(std::chrono::system_clock::to_time_t(now)), ms);
}

} // namespace dive
