#pragma once

#include "dive/video.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace dive {

// Normalized to [0,1] on both axes.
struct BoundingBox {
    double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
    bool operator==(const BoundingBox&) const = default;
};

// One detection as returned for a single image.
struct RawDetection {
    std::string label;
    BoundingBox bbox;
    double confidence = 0.0;
    bool operator==(const RawDetection&) const = default;
};

/// Parses a /detect response body, enforcing box and confidence ranges.
/// Throws ProtocolError on anything malformed.
std::vector<RawDetection> parse_detect_response(const nlohmann::json& body);

/// Request body for POST /detect.
nlohmann::json make_detect_request(const std::string& image_bytes, const std::vector<std::string>& labels,
                                   double threshold);

class DetectorClient {
public:
    virtual ~DetectorClient() = default;
    /// Must be safe to call concurrently.
    virtual std::vector<RawDetection> detect(const FrameRef& frame, const std::vector<std::string>& labels,
                                             double threshold) = 0;
    virtual std::string actor() const = 0;
};

// Client for the detection microservice (POST /detect, GET /health).
class HttpDetectorClient final : public DetectorClient {
public:
    explicit HttpDetectorClient(std::string base_url, double timeout_s = 60.0);

    std::vector<RawDetection> detect(const FrameRef& frame, const std::vector<std::string>& labels,
                                     double threshold) override;
    std::string actor() const override { return "detector"; }

    /// GET /health body. Throws ExternalServiceError when unreachable or not ready.
    nlohmann::json health() const;

private:
    std::string base_url_;
    double timeout_s_;
};

// In-process detector. The fixture form mirrors the service's mock mode: a
// table keyed by frame digest, unknown digests yield nothing.
class StubDetectorClient final : public DetectorClient {
public:
    using Fn = std::function<std::vector<RawDetection>(const FrameRef&, const std::vector<std::string>&)>;

    explicit StubDetectorClient(Fn fn) : fn_(std::move(fn)) {}

    /// {"<frame digest>": [{"label": str, "bbox": [x0,y0,x1,y1], "confidence": num}, ...], ...}
    static std::shared_ptr<StubDetectorClient> from_table(const nlohmann::json& table);
    static std::shared_ptr<StubDetectorClient> from_file(const std::filesystem::path& path);

    std::vector<RawDetection> detect(const FrameRef& frame, const std::vector<std::string>& labels,
                                     double threshold) override;
    std::string actor() const override { return "detector"; }

private:
    Fn fn_;
};

} // namespace dive
