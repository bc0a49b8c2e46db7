//! The bundled example designs and the UART mutation corpus.

/// SoC-lite: core, AXI-lite write path, UART transmitter, monitor and VTRs.
pub const SOC: &str = include_str!("../designs/soc.pdvl");

/// Request/acknowledge toy used by the SVA bridge checks.
pub const HANDSHAKE: &str = include_str!("../designs/handshake.pdvl");

/// Project file matching `SOC`.
pub const SOC_CONFIG: &str = include_str!("../designs/tlv.toml");

/// Roots listed in the bundled project file.
pub const SOC_TOPS: &[&str] = &[
    "vtr_tx_rx_transfer",
    "vtr_axi_mst_slv_transfer",
    "vtr_cpu_tx_enable_check",
    "vtr_cpu_tx_data_check",
    "vtr_cpu_uart_tx_driver",
    "vtr_cpu_uart_sequence",
    "vtr_cpu_addi_chain",
    "vtr_cpu_sb_addr",
    "vtr_uart_tx_frame",
];

/// A single textual edit of `SOC` that corrupts the UART data path while
/// still letting the monitor report a received byte.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mutation {
    pub name: &'static str,
    pub description: &'static str,
    pub find: &'static str,
    pub replace: &'static str,
}

pub const MUTATIONS: &[Mutation] = &[
    Mutation {
        name: "tx_drop_bit3",
        description: "transmitter clears data bit 3 when loading",
        find: "tx_shift = {axi_wdata, 1'b0};",
        replace: "tx_shift = {axi_wdata & 8'hF7, 1'b0};",
    },
    Mutation {
        name: "tx_drop_bit7",
        description: "transmitter clears data bit 7 when loading",
        find: "tx_shift = {axi_wdata, 1'b0};",
        replace: "tx_shift = {1'b0, axi_wdata[6:0], 1'b0};",
    },
    Mutation {
        name: "tx_load_slice_off_by_one",
        description: "load slice starts one bit low",
        find: "tx_shift = {axi_wdata, 1'b0};",
        replace: "tx_shift = {axi_wdata[6:0], 1'b0, 1'b0};",
    },
    Mutation {
        name: "tx_shift_slice_off_by_one",
        description: "shift register advances two bits per tick",
        find: "tx_shift = {1'b1, tx_shift[8:1]};",
        replace: "tx_shift = {1'b1, 1'b1, tx_shift[8:2]};",
    },
    Mutation {
        name: "tx_more_guard_inverted",
        description: "shift guard inverted, the line stays low",
        find: "c_tx_more { if (tx_bits != 4'd1) this; }",
        replace: "c_tx_more { if (tx_bits == 4'd1) this; }",
    },
    Mutation {
        name: "txd_merges_next_bit",
        description: "line driver ANDs in the following bit",
        find: "uart_txd = tx_shift[0] | !tx_busy;",
        replace: "uart_txd = (tx_shift[0] & tx_shift[1]) | !tx_busy;",
    },
    Mutation {
        name: "rx_shift_slice_off_by_one",
        description: "monitor keeps the low bits instead of shifting them",
        find: "rx_shift = {uart_txd, rx_shift[7:1]};",
        replace: "rx_shift = {uart_txd, rx_shift[6:0]};",
    },
    Mutation {
        name: "rx_input_inverted",
        description: "monitor samples the inverted line",
        find: "rx_shift = {uart_txd, rx_shift[7:1]};",
        replace: "rx_shift = {!uart_txd, rx_shift[7:1]};",
    },
    Mutation {
        name: "rx_data_guard_off_by_one",
        description: "monitor stops shifting one data bit early",
        find: "c_rx_data_bit { if (rx_bits != 4'd0 && rx_bits < 4'd9) this; }",
        replace: "c_rx_data_bit { if (rx_bits != 4'd0 && rx_bits < 4'd8) this; }",
    },
    Mutation {
        name: "rx_stop_guard_inverted",
        description: "monitor treats every non-stop sample as the stop bit",
        find: "c_rx_stop_bit { if (rx_bits == 4'd9) this; }",
        replace: "c_rx_stop_bit { if (rx_bits != 4'd9) this; }",
    },
];

impl Mutation {
    /// Apply the edit to `src`. Panics unless `find` occurs exactly once.
    pub fn apply(&self, src: &str) -> String {
        assert_eq!(
            src.matches(self.find).count(),
            1,
            "mutation `{}` must match exactly once",
            self.name
        );
        src.replacen(self.find, self.replace, 1)
    }
}
