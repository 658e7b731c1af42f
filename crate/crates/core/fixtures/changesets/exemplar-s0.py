[
    {
        "device": "S0",
        "config": [
            {
                "action": "remove",
                "path": ["sonic-interface:sonic-interface", "sonic-interface:INTERFACE", 
                         "INTERFACE_IPPREFIX_LIST"],
                "value": {"name": "Ethernet8", "ip-prefix": "10.0.2.1/24"}
            },
            {
                "action": "append",
                "path": ["sonic-interface:sonic-interface", "sonic-interface:INTERFACE", 
                         "INTERFACE_IPPREFIX_LIST"],
                "value": {"name": "Ethernet8", "ip-prefix": "10.0.5.1/24"}
            }
        ]
    }
]
