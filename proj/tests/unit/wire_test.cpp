// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#include <chrono>
#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "promptseg/backend_server.hpp"
#include "promptseg/errors.hpp"
#include "promptseg/wire.hpp"

namespace promptseg {
namespace {

using nlohmann::json;

SliceImage random_image(std::mt19937& rng, int w, int h) {
    std::uniform_int_distribution<int> byte(0, 255);
    std::vector<std::uint8_t> gray(static_cast<std::size_t>(w) * h);
    for (auto& g : gray) {
        g = static_cast<std::uint8_t>(byte(rng));
    }
    return SliceImage::from_gray(w, h, gray);
}

TEST(Base64, KnownVectors) {
    const std::string text = "foobar";
    const std::vector<std::uint8_t> bytes(text.begin(), text.end());
    EXPECT_EQ(wire::base64_encode(std::span(bytes).first(0)), "");
    EXPECT_EQ(wire::base64_encode(std::span(bytes).first(1)), "Zg==");
    EXPECT_EQ(wire::base64_encode(std::span(bytes).first(2)), "Zm8=");
    EXPECT_EQ(wire::base64_encode(bytes), "Zm9vYmFy");
    EXPECT_EQ(wire::base64_decode("Zm9vYmE="), std::vector<std::uint8_t>(bytes.begin(), bytes.end() - 1));
    EXPECT_THROW(wire::base64_decode("Zm9v!mE="), ProtocolError);
}

TEST(Wire, RequestRoundTrip) {
    std::mt19937 rng(1);
    SegmentationRequest req{random_image(rng, 7, 5),
                            {{1, 2, PromptLabel::Foreground}, {6, 4, PromptLabel::Background}},
                            BoxPrompt{{0, 1}, {5, 4}}};
    const json j = wire::encode_request(req);
    EXPECT_EQ(j.at("points").at(1).at("label"), "bg");
    EXPECT_EQ(j.at("box").at("min"), json::array({0, 1}));
    const auto back = wire::decode_request(j);
    EXPECT_EQ(back.image.gray_pixels(), req.image.gray_pixels());
    EXPECT_EQ(back.points, req.points);
    EXPECT_EQ(back.box, req.box);
    req.box.reset();
    EXPECT_TRUE(wire::encode_request(req).at("box").is_null());
    EXPECT_FALSE(wire::decode_request(wire::encode_request(req)).box.has_value());
}

TEST(Wire, MalformedTriplesAreProtocolErrors) {
    const BinaryMask2D m(3, 2);
    const json rle = rle_encode(m);
    EXPECT_NO_THROW(wire::decode_triple({{"masks", {rle, rle, rle}}, {"predicted_iou", {0.1, 0.2, 0.3}}}, 3, 2));
    EXPECT_THROW(wire::decode_triple({{"masks", {rle, rle}}, {"predicted_iou", {0.1, 0.2, 0.3}}}, 3, 2),
                 ProtocolError);
    EXPECT_THROW(wire::decode_triple({{"masks", {rle, rle, rle}}, {"predicted_iou", {0.1, 0.2}}}, 3, 2),
                 ProtocolError);
    EXPECT_THROW(wire::decode_triple({{"masks", {rle, rle, rle}}, {"predicted_iou", {0.1, 2.0, 0.3}}}, 3, 2),
                 ProtocolError);
    EXPECT_THROW(wire::decode_triple({{"masks", {rle, rle, rle}}, {"predicted_iou", {0.1, 0.2, 0.3}}}, 4, 2),
                 ProtocolError);
    json bad = rle;
    bad["counts"] = {2, 5};
    EXPECT_THROW(wire::decode_triple({{"masks", {rle, bad, rle}}, {"predicted_iou", {0.1, 0.2, 0.3}}}, 3, 2),
                 ProtocolError);
    EXPECT_THROW(wire::decode_triple({{"predicted_iou", {0.1, 0.2, 0.3}}}, 3, 2), ProtocolError);
}

// Echoes three masks derived from the request: the pixels above 127, their
// complement and an empty mask.
void echo_routes(httplib::Server& server) {
    server.Get("/v1/health", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(R"({"status":"ok","model":"echo-1"})", "application/json");
    });
    server.Post("/v1/predict", [](const httplib::Request& req, httplib::Response& res) {
        const auto request = wire::decode_request(json::parse(req.body));
        BinaryMask2D bright(request.image.width, request.image.height);
        BinaryMask2D dark(request.image.width, request.image.height);
        for (int y = 0; y < bright.height(); ++y) {
            for (int x = 0; x < bright.width(); ++x) {
                (request.image.gray(x, y) > 127 ? bright : dark).set(x, y);
            }
        }
        const PredictionTriple t{{bright, dark, BinaryMask2D(bright.width(), bright.height())}, {0.9, 0.5, 0.0}};
        res.set_content(wire::encode_triple(t).dump(), "application/json");
    });
}

TEST(External, RoundTripsRandomMasksThroughTheWire) {
    testing::StubServer stub(echo_routes);
    const ExternalSegmenter seg({stub.url(), 5.0, 2});
    EXPECT_EQ(seg.model_id(), "echo-1");
    std::mt19937 rng(2);
    for (int i = 0; i < 20; ++i) {
        const auto image = random_image(rng, 9 + i, 7 + i % 5);
        const auto t = seg.predict({image, {{0, 0, PromptLabel::Foreground}}, std::nullopt});
        for (int y = 0; y < image.height; ++y) {
            for (int x = 0; x < image.width; ++x) {
                ASSERT_EQ(t.masks[0].at(x, y), image.gray(x, y) > 127);
                ASSERT_EQ(t.masks[1].at(x, y), image.gray(x, y) <= 127);
            }
        }
        EXPECT_TRUE(t.masks[2].empty_mask());
        EXPECT_EQ(t.predicted_iou, (std::array<double, 3>{0.9, 0.5, 0.0}));
    }
}

TEST(External, EmptyTripleScoresZeroAgainstTruth) {
    testing::StubServer stub([](httplib::Server& s) {
        s.Post("/v1/predict", [](const httplib::Request& req, httplib::Response& res) {
            const auto r = wire::decode_request(json::parse(req.body));
            const BinaryMask2D e(r.image.width, r.image.height);
            res.set_content(wire::encode_triple({{e, e, e}, {0, 0, 0}}).dump(), "application/json");
        });
    });
    const ExternalSegmenter seg({stub.url(), 5.0, 1});
    std::mt19937 rng(3);
    const auto t = seg.predict({random_image(rng, 6, 6), {{1, 1, PromptLabel::Foreground}}, std::nullopt});
    BinaryMask2D gt(6, 6);
    gt.set(2, 2);
    for (const auto& m : t.masks) {
        EXPECT_EQ(iou(m, gt), 0.0);
    }
}

TEST(External, TypedErrors) {
    testing::StubServer stub([](httplib::Server& s) {
        s.Post("/v1/predict", [](const httplib::Request& req, httplib::Response& res) {
            const auto r = wire::decode_request(json::parse(req.body));
            const json rle = rle_encode(BinaryMask2D(r.image.width, r.image.height));
            const int mode = r.points.front().x;
            if (mode == 0) {
                res.set_content(json{{"masks", {rle, rle}}, {"predicted_iou", {0.1, 0.2}}}.dump(), "application/json");
            } else if (mode == 1) {
                res.set_content("{not json", "application/json");
            } else if (mode == 2) {
                res.status = 500;
                res.set_content("boom", "text/plain");
            } else {
                std::this_thread::sleep_for(std::chrono::milliseconds(1500));
                res.set_content("{}", "application/json");
            }
        });
        s.Get("/v1/health", [](const httplib::Request&, httplib::Response& res) {
            res.set_content(R"({"status":"degraded"})", "application/json");
        });
    });
    const ExternalSegmenter seg({stub.url(), 0.5, 2});
    const auto image = SliceImage::from_gray(4, 4, std::vector<std::uint8_t>(16, 1));
    auto request = [&](int mode) { return SegmentationRequest{image, {{mode, 0, PromptLabel::Foreground}}, std::nullopt}; };
    EXPECT_THROW(seg.predict(request(0)), ProtocolError);
    EXPECT_THROW(seg.predict(request(1)), ProtocolError);
    try {
        seg.predict(request(2));
        FAIL() << "HTTP 500 accepted";
    } catch (const ProtocolError&) {
        FAIL() << "HTTP 500 reported as a protocol error";
    } catch (const TransportError&) {
        FAIL() << "HTTP 500 reported as a transport error";
    } catch (const BackendError&) {
    }
    EXPECT_THROW(seg.predict(request(3)), TimeoutError);
    EXPECT_THROW(seg.health_check(), ProtocolError);
}

TEST(External, UnreachableIsATransportError) {
    int port = 0;
    {
        httplib::Server probe;
        port = probe.bind_to_any_port("127.0.0.1");
    }
    const ExternalSegmenter seg({"http://127.0.0.1:" + std::to_string(port), 1.0, 1});
    EXPECT_THROW(seg.health_check(), TransportError);
    const auto image = SliceImage::from_gray(2, 2, std::vector<std::uint8_t>(4, 1));
    EXPECT_THROW(seg.predict({image, {{0, 0, PromptLabel::Foreground}}, std::nullopt}), TransportError);
}

TEST(BackendServerTest, ServesTheReferenceBackendBitForBit) {
    auto reference = std::make_shared<ReferenceSegmenter>();
    BackendServer server(reference);
    const int port = server.bind("127.0.0.1", 0);
    testing::Serving serving(server);
    const ExternalSegmenter remote({"http://127.0.0.1:" + std::to_string(port), 5.0, 4});
    EXPECT_EQ(remote.model_id(), reference->model_id());
    std::mt19937 rng(4);
    for (int i = 0; i < 10; ++i) {
        BinaryMask2D truth = testing::random_blobs(rng, 24, 20, 3);
        std::vector<std::uint8_t> gray(truth.size());
        for (std::size_t p = 0; p < gray.size(); ++p) {
            gray[p] = truth[p] ? 190 : 50;
        }
        const SegmentationRequest req{SliceImage::from_gray(24, 20, gray), {{12, 10, PromptLabel::Foreground}},
                                      std::nullopt};
        EXPECT_EQ(remote.predict(req), reference->predict(req));
    }
    httplib::Client client("127.0.0.1", port);
    const auto bad = client.Post("/v1/predict", R"({"image":{}})", "application/json");
    ASSERT_TRUE(bad);
    EXPECT_EQ(bad->status, 400);
}

}  // namespace
}  // namespace promptseg
