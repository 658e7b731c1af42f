[
    {
        "device": "L0",
        "config": [
            {
                "action": "append",
                "path": ["sonic-interface:sonic-interface", "sonic-interface:INTERFACE", "INTERFACE_IPPREFIX_LIST"],
                "value": {"name": "Ethernet4", "ip-prefix": "10.1.1.1/30"}
            }
        ]
    },
    {
        "device": "S0",
        "config": [
            {
                "action": "append",
                "path": ["sonic-interface:sonic-interface", "sonic-interface:INTERFACE", "INTERFACE_IPPREFIX_LIST"],
                "value": {"name": "Ethernet4", "ip-prefix": "10.1.1.2/30"}
            }
        ]
    },
    {
        "device": "L1",
        "config": [
            {
                "action": "append",
                "path": ["sonic-interface:sonic-interface", "sonic-interface:INTERFACE", "INTERFACE_IPPREFIX_LIST"],
                "value": {"name": "Ethernet4", "ip-prefix": "10.1.1.5/30"}
            }
        ]
    },
    {
        "device": "S1",
        "config": [
            {
                "action": "append",
                "path": ["sonic-interface:sonic-interface", "sonic-interface:INTERFACE", "INTERFACE_IPPREFIX_LIST"],
                "value": {"name": "Ethernet4", "ip-prefix": "10.1.1.6/30"}
            }
        ]
    }
]
