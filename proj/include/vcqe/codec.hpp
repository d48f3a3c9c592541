#pragma once

#include <sstream>
#include <string>
#include <vector>

#include "vcqe/frame.hpp"
#include "vcqe/util.hpp"
#include "vcqe/y4m.hpp"

namespace vcqe {

// Configuration for the external encode/decode round trip. The command
// template maps an input y4m to a decoded output y4m through the encoder and
// decoder of choice; {input}, {output}, {qp} and {lf_flags} are substituted.
struct CodecConfig {
    int qp = 32;
    bool loop_filters = false;
    // GOP flags are part of the template: IPPP with an intra period that
    // covers whole short clips (keyint far above the Vimeo clip length).
    std::string encoder_command_template =
        "ffmpeg -y -loglevel error -i {input} -c:v libx265 "
        "-x265-params qp={qp}:{lf_flags}:keyint=250:min-keyint=250:scenecut=0:bframes=0 "
        "-f hevc {output}.hevc && "
        "ffmpeg -y -loglevel error -i {output}.hevc -pix_fmt yuv420p {output}";
    std::string lf_on_flags = "no-deblock=0:no-sao=0";
    std::string lf_off_flags = "no-deblock=1:no-sao=1";
};

inline void validate_codec_config(const CodecConfig& cfg) {
    check(cfg.qp >= 0 && cfg.qp <= 51, "codec: qp must be in [0, 51], got " + std::to_string(cfg.qp));
    for (const char* ph : {"{input}", "{output}", "{qp}", "{lf_flags}"})
        check(cfg.encoder_command_template.find(ph) != std::string::npos,
              std::string("codec: command template missing placeholder ") + ph);
}

inline std::string substitute_placeholders(std::string tpl, const std::string& key,
                                           const std::string& value) {
    std::size_t pos = 0;
    while ((pos = tpl.find(key, pos)) != std::string::npos) {
        tpl.replace(pos, key.size(), value);
        pos += value.size();
    }
    return tpl;
}

inline std::string build_codec_command(const CodecConfig& cfg, const std::string& input,
                                       const std::string& output) {
    validate_codec_config(cfg);
    std::string cmd = cfg.encoder_command_template;
    cmd = substitute_placeholders(cmd, "{input}", input);
    cmd = substitute_placeholders(cmd, "{output}", output);
    cmd = substitute_placeholders(cmd, "{qp}", std::to_string(cfg.qp));
    cmd = substitute_placeholders(cmd, "{lf_flags}",
                                  cfg.loop_filters ? cfg.lf_on_flags : cfg.lf_off_flags);
    return cmd;
}

struct EncodeDecodeResult {
    std::vector<Frame> decoded;
    std::string command;  // exact command line used, for run records
    std::string encoder_log;
};

// Round trip through the external codec: frames -> y4m -> encode+decode ->
// y4m -> frames. Output frames keep the input order and dimensions, carry
// variant=decoded and an IPPP kind sequence.
inline EncodeDecodeResult encode_decode_full(const std::vector<Frame>& frames,
                                             const CodecConfig& cfg) {
    check(!frames.empty(), "encode_decode: no input frames");
    validate_codec_config(cfg);
    const int h = frames[0].height(), w = frames[0].width();
    for (const auto& f : frames)
        check(f.height() == h && f.width() == w, "encode_decode: frame dimensions not uniform");

    // 4:2:0 exchange needs even dims; pad and crop back around the codec
    const int ph = (h + 1) / 2 * 2;
    const int pw = (w + 1) / 2 * 2;
    std::vector<Yuv420Image> planar;
    planar.reserve(frames.size());
    for (const auto& f : frames)
        planar.push_back(yuv::rgb_to_yuv420(pad_tensor_to_multiple(f.pixels, 2)));

    TempDir dir("vcqe-codec");
    const std::string in_path = dir.path() + "/in.y4m";
    const std::string out_path = dir.path() + "/out.y4m";
    write_y4m(in_path, planar);

    EncodeDecodeResult res;
    res.command = build_codec_command(cfg, in_path, out_path);
    ProcessResult proc = run_process(res.command);
    res.encoder_log = proc.output;
    if (proc.exit_code != 0)
        throw std::runtime_error("encode_decode: encoder command failed (exit " +
                                 std::to_string(proc.exit_code) + ")\ncommand: " + res.command +
                                 "\noutput:\n" + proc.output);

    std::vector<Yuv420Image> decoded_planar = read_y4m(out_path);
    check(decoded_planar.size() == frames.size(),
          "encode_decode: frame count changed, expected " + std::to_string(frames.size()) +
              ", got " + std::to_string(decoded_planar.size()));
    for (std::size_t t = 0; t < decoded_planar.size(); ++t) {
        check(decoded_planar[t].width == pw && decoded_planar[t].height == ph,
              "encode_decode: decoded dimensions mismatch at frame " + std::to_string(t));
        Frame f;
        f.pixels = crop_tensor(yuv::yuv420_to_rgb(decoded_planar[t]), h, w);
        f.index = static_cast<int>(t);
        f.kind = t == 0 ? FrameKind::I : FrameKind::P;
        f.variant = FrameVariant::decoded;
        res.decoded.push_back(std::move(f));
    }
    return res;
}

inline std::vector<Frame> encode_decode(const std::vector<Frame>& frames, const CodecConfig& cfg) {
    return encode_decode_full(frames, cfg).decoded;
}

// True iff the frame types form I,P,P,...; empty metadata is an error.
// Types are picture-type characters ('I', 'P', 'B').
inline bool verify_gop(const std::vector<char>& types) {
    check(!types.empty(), "verify_gop: empty frame type list");
    if (types[0] != 'I') return false;
    for (std::size_t t = 1; t < types.size(); ++t)
        if (types[t] != 'P') return false;
    return true;
}

// Extracts per-frame picture types from encoder/inspector text. Recognizes
// "pict_type=X" lines (ffprobe) and "type X" tokens (the bundled simulator).
inline std::vector<char> parse_frame_types(const std::string& metadata) {
    std::vector<char> types;
    std::istringstream is(metadata);
    std::string line;
    while (std::getline(is, line)) {
        char t = 0;
        std::size_t pos;
        if ((pos = line.find("pict_type=")) != std::string::npos && pos + 10 < line.size())
            t = line[pos + 10];
        else if ((pos = line.find("type ")) != std::string::npos && pos + 5 < line.size())
            t = line[pos + 5];
        if (t == 'I' || t == 'P' || t == 'B')
            types.push_back(t);
        else if (t != 0)
            throw std::runtime_error("parse_frame_types: unknown picture type '" +
                                     std::string(1, t) + "' in: " + line);
    }
    return types;
}

}  // namespace vcqe
