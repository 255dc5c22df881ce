#include "dive/detector.hpp"

#include "dive/digest.hpp"
#include "dive/errors.hpp"

#include <httplib.h>

namespace dive {

namespace {

RawDetection detection_from_json(const nlohmann::json& d) {
    RawDetection r;
    r.label = d.at("label").get<std::string>();
    const auto& b = d.at("bbox");
    if (!b.is_array() || b.size() != 4) {
        throw ProtocolError("detect: bbox must be [x0,y0,x1,y1]");
    }
    r.bbox = BoundingBox{b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
    r.confidence = d.at("confidence").get<double>();
    const auto& x = r.bbox;
    if (!(0.0 <= x.x0 && x.x0 < x.x1 && x.x1 <= 1.0 && 0.0 <= x.y0 && x.y0 < x.y1 && x.y1 <= 1.0)) {
        throw ProtocolError("detect: bbox outside the unit square or degenerate");
    }
    if (!(r.confidence >= 0.0 && r.confidence <= 1.0)) {
        throw ProtocolError("detect: confidence outside [0,1]");
    }
    if (r.label.empty()) {
        throw ProtocolError("detect: empty label");
    }
    return r;
}

} // namespace

std::vector<RawDetection> parse_detect_response(const nlohmann::json& body) {
    std::vector<RawDetection> out;
    try {
        for (const auto& d : body.at("detections")) {
            out.push_back(detection_from_json(d));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ProtocolError(std::string("detect: malformed reply: ") + e.what());
    }
    return out;
}

nlohmann::json make_detect_request(const std::string& image_bytes, const std::vector<std::string>& labels,
                                   double threshold) {
    return {{"image", base64_encode(image_bytes)}, {"labels", labels}, {"threshold", threshold}};
}

HttpDetectorClient::HttpDetectorClient(std::string base_url, double timeout_s)
    : base_url_(std::move(base_url)), timeout_s_(timeout_s) {
    while (!base_url_.empty() && base_url_.back() == '/') {
        base_url_.pop_back();
    }
    if (base_url_.empty()) {
        throw ConfigurationError("detector endpoint is empty");
    }
}

std::vector<RawDetection> HttpDetectorClient::detect(const FrameRef& frame, const std::vector<std::string>& labels,
                                                     double threshold) {
    const auto body = make_detect_request(read_file(frame.path), labels, threshold).dump();
    httplib::Client client(base_url_);
    client.set_connection_timeout(static_cast<time_t>(timeout_s_));
    client.set_read_timeout(static_cast<time_t>(timeout_s_));
    auto res = client.Post("/detect", body, "application/json");
    if (!res) {
        throw ExternalServiceError("detector unreachable at " + base_url_ + ": " + httplib::to_string(res.error()));
    }
    if (res->status >= 500) {
        throw ExternalServiceError("detector failed with HTTP " + std::to_string(res->status) + ": " + res->body);
    }
    if (res->status != 200) {
        throw ProtocolError("detector rejected request with HTTP " + std::to_string(res->status) + ": " + res->body);
    }
    try {
        return parse_detect_response(nlohmann::json::parse(res->body));
    } catch (const nlohmann::json::parse_error& e) {
        throw ProtocolError(std::string("detector reply is not JSON: ") + e.what());
    }
}

nlohmann::json HttpDetectorClient::health() const {
    httplib::Client client(base_url_);
    client.set_connection_timeout(static_cast<time_t>(timeout_s_));
    auto res = client.Get("/health");
    if (!res) {
        throw ExternalServiceError("detector unreachable at " + base_url_);
    }
    if (res->status != 200) {
        throw ExternalServiceError("detector not ready: HTTP " + std::to_string(res->status));
    }
    try {
        return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::parse_error& e) {
        throw ProtocolError(std::string("detector health reply is not JSON: ") + e.what());
    }
}

std::shared_ptr<StubDetectorClient> StubDetectorClient::from_table(const nlohmann::json& table) {
    std::map<std::string, std::vector<RawDetection>> by_digest;
    try {
        for (const auto& [digest, list] : table.items()) {
            auto& dets = by_digest[digest];
            for (const auto& d : list) {
                dets.push_back(detection_from_json(d));
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("detection fixture: ") + e.what());
    } catch (const ProtocolError& e) {
        throw ValidationError(std::string("detection fixture: ") + e.what());
    }
    return std::make_shared<StubDetectorClient>(
        [table = std::move(by_digest)](const FrameRef& frame, const std::vector<std::string>&) {
            auto it = table.find(frame.digest);
            return it == table.end() ? std::vector<RawDetection>{} : it->second;
        });
}

std::shared_ptr<StubDetectorClient> StubDetectorClient::from_file(const std::filesystem::path& path) {
    try {
        return from_table(nlohmann::json::parse(read_file(path)));
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

std::vector<RawDetection> StubDetectorClient::detect(const FrameRef& frame, const std::vector<std::string>& labels,
                                                     double threshold) {
    auto dets = fn_(frame, labels);
    std::erase_if(dets, [&](const RawDetection& d) { return d.confidence < threshold; });
    return dets;
}

} // namespace dive
